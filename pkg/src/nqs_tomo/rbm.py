"""Complex-parameter restricted Boltzmann machine wavefunction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevec import MAX_QUBITS, StateVector, basis_bits


def param_count(n_visible: int, n_hidden: int) -> int:
    if n_visible < 1 or n_hidden < 1:
        raise ValueError("layer sizes must be positive")
    return 2 * (n_visible * n_hidden + n_visible + n_hidden)


def log1p_exp(z: np.ndarray) -> np.ndarray:
    """Complex log(1 + e^z) without overflow for large Re(z)."""
    z = np.asarray(z, dtype=complex)
    pos = z.real > 0
    out = np.empty_like(z)
    out[pos] = z[pos] + np.log1p(np.exp(-z[pos]))
    out[~pos] = np.log1p(np.exp(z[~pos]))
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    pos = z.real > 0
    out = np.empty_like(z)
    e = np.exp(-z[pos])
    out[pos] = 1 / (1 + e)
    e = np.exp(z[~pos])
    out[~pos] = e / (1 + e)
    return out


def _as_bits(sigma, n: int) -> np.ndarray:
    bits = np.array([int(ch) for ch in sigma] if isinstance(sigma, str) else sigma)
    if bits.ndim == 1:
        bits = bits[None, :]
    if bits.shape[-1] != n or not np.isin(bits, (0, 1)).all():
        raise ValueError(f"configuration must be {n} binary values, got {sigma!r}")
    return bits


@dataclass(frozen=True, eq=False)
class RbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=complex)
        b = np.array(self.b, dtype=complex).reshape(-1)
        c = np.array(self.c, dtype=complex).reshape(-1)
        if W.shape != (c.size, b.size):
            raise ValueError(f"W has shape {W.shape}, expected {(c.size, b.size)}")
        if not all(np.isfinite(x).all() for x in (W, b, c)):
            raise ValueError("non-finite RBM parameters")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n_visible(self) -> int:
        return self.b.size

    n_qubits = n_visible

    @property
    def n_hidden(self) -> int:
        return self.c.size

    @property
    def real_parameter_count(self) -> int:
        return param_count(self.n_visible, self.n_hidden)

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParams":
        return cls(np.zeros((n_hidden, n_visible)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, seed=None, scale: float = 0.01) -> "RbmParams":
        rng = np.random.default_rng(seed)
        flat = rng.normal(scale=scale, size=param_count(n_visible, n_hidden))
        return cls.zeros(n_visible, n_hidden).with_flat(flat)

    # flat layout: real parts of (W, b, c) followed by their imaginary parts
    def flat(self) -> np.ndarray:
        z = np.concatenate([self.W.ravel(), self.b, self.c])
        return np.concatenate([z.real, z.imag])

    def with_flat(self, vec) -> "RbmParams":
        vec = np.asarray(vec, dtype=float)
        half = vec.size // 2
        z = vec[:half] + 1j * vec[half:]
        nw = self.W.size
        return RbmParams(
            z[:nw].reshape(self.W.shape), z[nw : nw + self.n_visible], z[nw + self.n_visible :]
        )

    def _theta(self, bits: np.ndarray) -> np.ndarray:
        return bits @ self.W.T + self.c

    def log_psi(self, bits: np.ndarray | None = None) -> np.ndarray:
        """Unnormalized log amplitudes b.s + sum_j log(1 + e^{(Ws+c)_j})."""
        if bits is None:
            bits = basis_bits(self.n_visible)
        return bits @ self.b + log1p_exp(self._theta(bits)).sum(axis=1)

    def backprop(self, omega: np.ndarray) -> np.ndarray:
        """Return 2 Re sum_s omega_s d log psi_s / d lambda over all configurations."""
        bits = basis_bits(self.n_visible).astype(float)
        sig = _sigmoid(self._theta(bits))
        g_b = omega @ bits
        g_c = omega @ sig
        g_W = (sig * omega[:, None]).T @ bits
        z = np.concatenate([g_W.ravel(), g_b, g_c])
        # holomorphic in each complex parameter: d/dx -> O, d/dy -> iO
        return np.concatenate([2 * z.real, -2 * z.imag])

    def to_dict(self) -> dict:
        return {
            "model": "rbm",
            "n_visible": self.n_visible,
            "n_hidden": self.n_hidden,
            "params": self.flat().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RbmParams":
        if doc.get("model") != "rbm":
            raise ValueError("not an RBM checkpoint")
        return cls.zeros(doc["n_visible"], doc["n_hidden"]).with_flat(doc["params"])


def unnormalized_log_amplitude(p: RbmParams, sigma) -> complex:
    return complex(p.log_psi(_as_bits(sigma, p.n_visible))[0])


def log_partition(p: RbmParams, max_qubits: int = MAX_QUBITS) -> float:
    if p.n_visible > max_qubits:
        raise ValueError(f"{p.n_visible} visible units exceeds enumeration cap {max_qubits}")
    x = 2 * p.log_psi().real
    top = x.max()
    return float(top + np.log(np.exp(x - top).sum()))


def to_statevector(p: RbmParams, max_qubits: int = MAX_QUBITS) -> StateVector:
    if p.n_visible > max_qubits:
        raise ValueError(f"{p.n_visible} visible units exceeds enumeration cap {max_qubits}")
    logs = p.log_psi()
    amps = np.exp(logs - logs.real.max())
    return StateVector(p.n_visible, amps / np.linalg.norm(amps))
