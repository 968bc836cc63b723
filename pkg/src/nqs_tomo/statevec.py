"""Dense statevector engine: Pauli-sum action, exact groundstates, basis rotations."""

from __future__ import annotations

import functools
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli import MeasurementBasis, PauliHamiltonian

MAX_QUBITS = 14
NORM_TOL = 1e-10
STATE_MAGIC = b"NQSSTATE"

_SQ2 = 1 / np.sqrt(2)
# Rows are the measurement eigenvectors (conjugated), i.e. these map a state
# into the frame where the chosen axis reads out in the computational basis.
ROTATION_DAG = {
    "Z": np.eye(2, dtype=complex),
    "X": np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2,
    "Y": np.array([[1, -1j], [1, 1j]], dtype=complex) * _SQ2,
}


class DimensionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray
    raw: bool = False

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.n_qubits:
            raise DimensionError(f"expected {2**self.n_qubits} amplitudes, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if not self.raw and abs(self.norm() - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {self.norm():.3e})")

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "StateVector":
        """Normalize an arbitrary nonzero amplitude vector."""
        amps = np.asarray(amplitudes, dtype=complex)
        n = int(round(np.log2(amps.size)))
        return cls(n, amps / np.linalg.norm(amps))

    @classmethod
    def basis_state(cls, bits: str) -> "StateVector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes / self.norm())

    def gauge_fixed(self) -> "StateVector":
        """Global phase chosen so the largest-magnitude amplitude is real positive."""
        amps = self.amplitudes
        big = amps[np.argmax(np.abs(amps))]
        return StateVector(self.n_qubits, amps * (abs(big) / big), raw=self.raw)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class GroundstateResult:
    energy: float
    state: StateVector
    residual_norm: float


@functools.lru_cache(maxsize=16)
def basis_bits(n_qubits: int) -> np.ndarray:
    """All computational basis configurations, shape (2**n, n), qubit 0 as MSB."""
    idx = np.arange(2**n_qubits)
    shifts = np.arange(n_qubits - 1, -1, -1)
    bits = ((idx[:, None] >> shifts) & 1).astype(np.int8)
    bits.setflags(write=False)
    return bits


def bitstring(index: int, n_qubits: int) -> str:
    return format(index, f"0{n_qubits}b")


def _check_dims(n_qubits: int, s: StateVector):
    if s.n_qubits != n_qubits:
        raise DimensionError(f"state has {s.n_qubits} qubits, operator has {n_qubits}")


class _PauliAction:
    """Precomputed flip masks and sign vectors for a Pauli sum."""

    def __init__(self, h: PauliHamiltonian):
        n = h.n_qubits
        idx = np.arange(2**n)
        self.n_qubits = n
        self.offset = h.identity_offset
        self.flips = []
        self.factors = []
        for t in h.terms:
            xmask = ymask = zmask = 0
            for j, op in enumerate(t.ops):
                bit = 1 << (n - 1 - j)
                if op == "X":
                    xmask |= bit
                elif op == "Y":
                    ymask |= bit
                elif op == "Z":
                    zmask |= bit
            n_y = bin(ymask).count("1")
            sign = 1 - 2 * (_parity(idx & (ymask | zmask)))
            self.flips.append(idx ^ (xmask | ymask))
            self.factors.append(t.coeff * (1j**n_y) * sign)

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        out = self.offset * psi
        for flip, factor in zip(self.flips, self.factors):
            # P|s> = factor(s) |s ^ flipmask>
            out[flip] += factor * psi
        return out


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    p = np.zeros_like(x)
    while np.any(x):
        p ^= x & 1
        x >>= 1
    return p


def apply_hamiltonian(h: PauliHamiltonian, s: StateVector) -> StateVector:
    _check_dims(h.n_qubits, s)
    return StateVector(s.n_qubits, _PauliAction(h)(s.amplitudes), raw=True)


def dense_matrix(h: PauliHamiltonian) -> np.ndarray:
    """Explicit 2^N x 2^N matrix via Kronecker products (small N only)."""
    mats = {
        "I": np.eye(2, dtype=complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    dim = 2**h.n_qubits
    out = h.identity_offset * np.eye(dim, dtype=complex)
    for t in h.terms:
        m = np.array([[1.0 + 0j]])
        for op in t.ops:
            m = np.kron(m, mats[op])
        out += t.coeff * m
    return out


def _lanczos(apply, v0: np.ndarray, krylov_dim: int):
    """Lanczos with full reorthogonalization; returns lowest Ritz pair."""
    dim = v0.size
    m = min(krylov_dim, dim)
    basis = np.zeros((m, dim), dtype=complex)
    alphas, betas = [], []
    v = v0 / np.linalg.norm(v0)
    for j in range(m):
        basis[j] = v
        w = apply(v)
        alpha = np.vdot(v, w).real
        alphas.append(alpha)
        for _ in range(2):
            w = w - basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
        beta = np.linalg.norm(w)
        if j == m - 1 or beta < 1e-12:
            break
        betas.append(beta)
        v = w / beta
    k = len(alphas)
    tri = np.diag(alphas) + np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
    evals, evecs = np.linalg.eigh(tri)
    ritz = evecs[:, 0] @ basis[:k]
    return evals[0], ritz / np.linalg.norm(ritz)


def groundstate(
    h: PauliHamiltonian,
    max_qubits: int = MAX_QUBITS,
    tol: float = 1e-10,
    max_restarts: int = 50,
    krylov_dim: int = 120,
    seed: int = 0,
) -> GroundstateResult:
    """Lowest eigenpair by restarted Lanczos, dense fallback for N <= 8."""
    n = h.n_qubits
    if n > max_qubits:
        raise ValueError(f"{n} qubits exceeds the cap of {max_qubits}")
    action = _PauliAction(h)
    # residual is measured in the offset-free operator
    shifted = lambda v: action(v) - h.identity_offset * v  # noqa: E731
    rng = np.random.default_rng(seed)
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    residual = np.inf
    for _ in range(max_restarts):
        theta, v = _lanczos(shifted, v, krylov_dim)
        residual = np.linalg.norm(shifted(v) - theta * v)
        if residual <= tol:
            break
    else:
        if n > 8:
            raise ConvergenceError(f"Lanczos did not converge (residual {residual:.2e})")
        evals, evecs = np.linalg.eigh(dense_matrix(h) - h.identity_offset * np.eye(2**n))
        theta, v = evals[0], evecs[:, 0]
        residual = np.linalg.norm(shifted(v) - theta * v)
    state = StateVector.from_amplitudes(v).gauge_fixed()
    energy = expectation(h, state)
    return GroundstateResult(energy, state, float(residual))


def rotation_stack(bases: Sequence[MeasurementBasis]) -> np.ndarray:
    """Per-qubit R_k^dagger factors, shape (K, N, 2, 2)."""
    return np.array([[ROTATION_DAG[op] for op in b.ops] for b in bases])


def rotate_batch(vectors: np.ndarray, factors: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """Apply product rotations to a batch of vectors.

    vectors has shape (K, 2**N) and factors (K, N, 2, 2); row k is rotated by
    the tensor product of factors[k]. With adjoint=True the conjugate
    transpose of each factor is used instead.
    """
    k, n = factors.shape[:2]
    out = np.asarray(vectors, dtype=complex).reshape((k,) + (2,) * n)
    mats = factors.conj() if adjoint else factors.transpose(0, 1, 3, 2)
    for j in range(n):
        if np.all(factors[:, j] == ROTATION_DAG["Z"]):
            continue
        moved = np.moveaxis(out, j + 1, -1)
        shape = moved.shape
        # row-vector form: new[..., a] = sum_b U[a, b] old[..., b]
        moved = np.matmul(moved.reshape(k, -1, 2), mats[:, j])
        out = np.moveaxis(moved.reshape(shape), -1, j + 1)
    return out.reshape(k, -1)


def rotate_to_basis(basis: MeasurementBasis, s: StateVector) -> StateVector:
    """Return R_k^dagger |s>, the state whose Z readout realizes basis k."""
    _check_dims(basis.n_qubits, s)
    out = rotate_batch(s.amplitudes[None, :], rotation_stack([basis]))[0]
    return StateVector(s.n_qubits, out, raw=s.raw)


def rotate_from_basis(basis: MeasurementBasis, s: StateVector) -> StateVector:
    """Return R_k |s>, the adjoint of rotate_to_basis."""
    _check_dims(basis.n_qubits, s)
    out = rotate_batch(s.amplitudes[None, :], rotation_stack([basis]), adjoint=True)[0]
    return StateVector(s.n_qubits, out, raw=s.raw)


def expectation(h: PauliHamiltonian, s: StateVector) -> float:
    _check_dims(h.n_qubits, s)
    value = np.vdot(s.amplitudes, _PauliAction(h)(s.amplitudes))
    if abs(value.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def fidelity(a: StateVector, b: StateVector) -> float:
    if a.n_qubits != b.n_qubits:
        raise DimensionError("states have different qubit counts")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def save_state(path, s: StateVector) -> None:
    with open(path, "wb") as fh:
        fh.write(STATE_MAGIC + struct.pack("<Q", s.n_qubits))
        fh.write(np.ascontiguousarray(s.amplitudes, dtype="<c16").tobytes())


def load_state(path) -> StateVector:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16 or header[:8] != STATE_MAGIC:
            raise ValueError(f"{path}: not a state file")
        (n,) = struct.unpack("<Q", header[8:])
        body = fh.read()
    if len(body) != 16 * 2**n:
        raise ValueError(f"{path}: truncated state file")
    return StateVector(n, np.frombuffer(body, dtype="<c16").astype(complex))
