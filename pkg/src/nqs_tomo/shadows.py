"""Uniform classical-shadow energy estimation (random single-qubit Pauli axes)."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .pauli import MeasurementBasis, PauliHamiltonian
from .sampler import rotated_probabilities
from .statevec import StateVector, basis_bits

AXES = "XYZ"


@dataclass(frozen=True)
class ShadowSample:
    basis: str
    outcome: str

    def __post_init__(self):
        if len(self.basis) != len(self.outcome):
            raise ValueError("basis and outcome lengths differ")


@dataclass(frozen=True, eq=False)
class ShadowTable:
    """Reduced shadow record: counts[b, i] for axis setting b and outcome index i.

    Settings are enumerated in lexicographic order over "XYZ" with qubit 0
    varying slowest.
    """

    n_qubits: int
    counts: np.ndarray

    @property
    def shots(self) -> int:
        return int(self.counts.sum())

    def settings(self) -> list[str]:
        return all_settings(self.n_qubits)


@dataclass
class ShadowEstimate:
    energy: float
    shots: int
    per_term_estimates: np.ndarray | None = None


def all_settings(n_qubits: int) -> list[str]:
    return ["".join(p) for p in itertools.product(AXES, repeat=n_qubits)]


def _setting_probs(target: StateVector) -> np.ndarray:
    bases = [MeasurementBasis(s) for s in all_settings(target.n_qubits)]
    return rotated_probabilities(target, bases)


def shadow_table(target: StateVector, shots: int, seed) -> ShadowTable:
    """Draw ``shots`` uniform random axis settings and Born outcomes, keeping only counts."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = _setting_probs(target)
    n_settings = probs.shape[0]
    alloc_seq, outcome_seq = np.random.SeedSequence(seed).spawn(2)
    per_setting = np.random.Generator(np.random.PCG64(alloc_seq)).multinomial(
        shots, np.full(n_settings, 1 / n_settings)
    )
    rng = np.random.Generator(np.random.PCG64(outcome_seq))
    counts = np.zeros(probs.shape, dtype=np.int64)
    for b in np.flatnonzero(per_setting):
        counts[b] = rng.multinomial(per_setting[b], probs[b])
    return ShadowTable(target.n_qubits, counts)


def collect_shadows(target: StateVector, shots: int, seed) -> list[ShadowSample]:
    """Per-shot shadow record, each qubit's axis drawn independently from X, Y, Z."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    n = target.n_qubits
    rng = np.random.default_rng(seed)
    axes = rng.integers(0, 3, size=(shots, n))
    uniforms = rng.random(shots)
    setting_index = axes @ (3 ** np.arange(n - 1, -1, -1))
    cdf = np.cumsum(_setting_probs(target), axis=1)
    outcomes = np.empty(shots, dtype=np.int64)
    for b in np.unique(setting_index):
        sel = setting_index == b
        outcomes[sel] = np.minimum(np.searchsorted(cdf[b], uniforms[sel], side="right"),
                                   cdf.shape[1] - 1)
    fmt = f"0{n}b"
    return [
        ShadowSample("".join(AXES[a] for a in row), format(o, fmt))
        for row, o in zip(axes, outcomes)
    ]


def _term_arrays(h: PauliHamiltonian):
    supports = [np.array(t.support, dtype=int) for t in h.terms]
    wanted = [np.array([AXES.index(t.ops[j]) for j in t.support], dtype=int) for t in h.terms]
    coeffs = np.array([t.coeff for t in h.terms])
    return supports, wanted, coeffs


def _per_sample(h: PauliHamiltonian, axes: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Single-shot estimates, shape (shots, terms)."""
    supports, wanted, _ = _term_arrays(h)
    out = np.empty((axes.shape[0], len(supports)))
    for t, (supp, ax) in enumerate(zip(supports, wanted)):
        match = np.all(axes[:, supp] == ax, axis=1)
        parity = np.prod(1 - 2 * bits[:, supp], axis=1)
        out[:, t] = match * parity * 3.0 ** supp.size
    return out


def _table_term_means(h: PauliHamiltonian, table: ShadowTable) -> np.ndarray:
    n = table.n_qubits
    settings = np.array([[AXES.index(c) for c in s] for s in all_settings(n)], dtype=int)
    bits = basis_bits(n).astype(int)
    supports, wanted, _ = _term_arrays(h)
    means = np.empty(len(supports))
    for t, (supp, ax) in enumerate(zip(supports, wanted)):
        match = np.all(settings[:, supp] == ax, axis=1)
        parity = np.prod(1 - 2 * bits[:, supp], axis=1)
        total = (table.counts[match] @ parity).sum()
        means[t] = total * 3.0 ** supp.size / table.shots
    return means


def estimate_energy(
    h: PauliHamiltonian,
    samples: Union[ShadowTable, Sequence[ShadowSample]],
    median_of_means: int | None = None,
) -> ShadowEstimate:
    """Energy estimate offset + sum_P c_P * mean(3^|P| * match * parity).

    ``median_of_means`` (diagnostics only) splits a per-shot sample list into
    that many contiguous groups and takes the median of the group energies.
    """
    _, _, coeffs = _term_arrays(h)
    if isinstance(samples, ShadowTable):
        if samples.shots == 0:
            raise ValueError("no shadow samples")
        if median_of_means:
            raise ValueError("median-of-means needs the per-shot sample list")
        means = _table_term_means(h, samples)
        return ShadowEstimate(float(h.identity_offset + coeffs @ means), samples.shots, means)
    if len(samples) == 0:
        raise ValueError("no shadow samples")
    axes = np.array([[AXES.index(c) for c in s.basis] for s in samples], dtype=int)
    bits = np.array([[int(c) for c in s.outcome] for s in samples], dtype=int)
    per = _per_sample(h, axes, bits)
    means = per.mean(axis=0)
    energy = h.identity_offset + coeffs @ means
    if median_of_means:
        groups = np.array_split(per, median_of_means)
        energy = h.identity_offset + np.median([coeffs @ g.mean(axis=0) for g in groups])
    return ShadowEstimate(float(energy), len(samples), means)
