import numpy as np
import pytest

from nqs_tomo.pauli import PauliHamiltonian
from nqs_tomo.statevec import StateVector


def random_state(n, rng):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector.from_amplitudes(v)


def random_hamiltonian(n, rng, n_terms=8):
    terms = ["".join(rng.choice(list("IXYZ"), size=n)) for _ in range(n_terms)]
    return PauliHamiltonian.from_terms(
        n, [(t, rng.normal()) for t in terms] + [("I" * n, rng.normal())]
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
