"""Autoregressive complex recurrent wavefunction (single tanh layer, scalar inputs)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevec import MAX_QUBITS, StateVector, basis_bits

_VECTORS = ("p", "q", "u", "v", "w")
_SCALARS = ("a", "b", "c")


def param_count(n_hidden: int) -> int:
    if n_hidden < 1:
        raise ValueError("n_hidden must be positive")
    return n_hidden**2 + 5 * n_hidden + 3


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(_log_sigmoid(x))


def _as_bits(sigma, n: int) -> np.ndarray:
    bits = np.array([int(ch) for ch in sigma] if isinstance(sigma, str) else sigma)
    if bits.ndim == 1:
        bits = bits[None, :]
    if bits.shape[-1] != n or not np.isin(bits, (0, 1)).all():
        raise ValueError(f"configuration must be {n} binary values, got {sigma!r}")
    return bits


@dataclass(frozen=True, eq=False)
class RnnParams:
    n_qubits: int
    M: np.ndarray
    p: np.ndarray
    q: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        nh = M.shape[0]
        if M.shape != (nh, nh):
            raise ValueError("M must be square")
        for name in _VECTORS:
            vec = np.array(getattr(self, name), dtype=float).reshape(-1)
            if vec.size != nh:
                raise ValueError(f"{name} has length {vec.size}, expected {nh}")
            object.__setattr__(self, name, vec)
        for name in _SCALARS:
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "M", M)
        if not np.isfinite(self.flat()).all():
            raise ValueError("non-finite RNN parameters")

    @property
    def n_hidden(self) -> int:
        return self.M.shape[0]

    @property
    def real_parameter_count(self) -> int:
        return param_count(self.n_hidden)

    @classmethod
    def zeros(cls, n_qubits: int, n_hidden: int) -> "RnnParams":
        z = np.zeros(n_hidden)
        return cls(n_qubits, np.zeros((n_hidden, n_hidden)), z, z, z, z, z)

    @classmethod
    def random(cls, n_qubits: int, n_hidden: int, seed=None) -> "RnnParams":
        """Fan-in uniform init for M, p, u, v, w; q and the scalars start at zero."""
        rng = np.random.default_rng(seed)
        r = 1 / np.sqrt(n_hidden)
        draw = lambda *shape: rng.uniform(-r, r, size=shape)  # noqa: E731
        M = draw(n_hidden, n_hidden)
        p, u, v, w = (draw(n_hidden) for _ in range(4))
        return cls(n_qubits, M, p, np.zeros(n_hidden), u, v, w)

    def flat(self) -> np.ndarray:
        parts = [self.M.ravel()] + [getattr(self, n) for n in _VECTORS]
        return np.concatenate(parts + [[self.a, self.b, self.c]])

    def with_flat(self, vec) -> "RnnParams":
        vec = np.asarray(vec, dtype=float)
        nh = self.n_hidden
        M = vec[: nh * nh].reshape(nh, nh)
        rest = vec[nh * nh :]
        vecs = {n: rest[i * nh : (i + 1) * nh] for i, n in enumerate(_VECTORS)}
        a, b, c = rest[5 * nh :]
        return RnnParams(self.n_qubits, M, a=a, b=b, c=c, **vecs)

    def _forward(self, bits: np.ndarray):
        """Hidden states (N+1, B, Nh) with h_0 = 0, and pre-activations s_j = w.h_j + c."""
        batch, n = bits.shape
        hs = np.zeros((n + 1, batch, self.n_hidden))
        prev_bit = np.zeros(batch)
        for j in range(n):
            hs[j + 1] = np.tanh(hs[j] @ self.M.T + np.outer(prev_bit, self.p) + self.q)
            prev_bit = bits[:, j]
        return hs, hs[1:] @ self.w + self.c

    def hidden_states(self, sigma) -> list[np.ndarray]:
        hs, _ = self._forward(_as_bits(sigma, self.n_qubits).astype(float))
        return [h[0] for h in hs[1:]]

    def conditionals(self, bits: np.ndarray):
        """Log conditional probabilities and local phases, each shape (N, B)."""
        bits = np.asarray(bits, dtype=float)
        hs, s = self._forward(bits)
        x = bits.T
        # exp(s*x) / (1 + exp(s)): log-sigmoid of s for x=1, of -s for x=0
        log_p = x * _log_sigmoid(s) + (1 - x) * _log_sigmoid(-s)
        theta = (hs[1:] @ self.u + self.a) * x + hs[1:] @ self.v + self.b
        return log_p, theta

    def log_psi(self, bits: np.ndarray | None = None) -> np.ndarray:
        if bits is None:
            bits = basis_bits(self.n_qubits)
        log_p, theta = self.conditionals(bits)
        return 0.5 * log_p.sum(axis=0) + 2j * np.pi * theta.sum(axis=0)

    def backprop(self, omega: np.ndarray) -> np.ndarray:
        """Return 2 Re sum_s omega_s d log psi_s / d lambda, by backpropagation through time."""
        bits = basis_bits(self.n_qubits).astype(float)
        n = self.n_qubits
        hs, s = self._forward(bits)
        # 2 Re[omega (0.5 dlogp + 2 pi i dtheta)] = alpha dlogp + beta dtheta
        alpha = omega.real
        beta = -4 * np.pi * omega.imag
        grads = {name: np.zeros_like(getattr(self, name)) for name in ("M",) + _VECTORS}
        ga = gb = gc = 0.0
        dh_next = np.zeros((bits.shape[0], self.n_hidden))
        for j in range(n - 1, -1, -1):
            h = hs[j + 1]
            x = bits[:, j]
            ds = alpha * (x - _sigmoid(s[j]))
            grads["w"] += ds @ h
            gc += ds.sum()
            bx = beta * x
            grads["u"] += bx @ h
            ga += bx.sum()
            grads["v"] += beta @ h
            gb += beta.sum()
            dh = dh_next + np.outer(ds, self.w) + np.outer(bx, self.u) + np.outer(beta, self.v)
            dz = dh * (1 - h**2)
            prev_bit = bits[:, j - 1] if j > 0 else np.zeros(bits.shape[0])
            grads["M"] += dz.T @ hs[j]
            grads["p"] += prev_bit @ dz
            grads["q"] += dz.sum(axis=0)
            dh_next = dz @ self.M
        parts = [grads["M"].ravel()] + [grads[n_] for n_ in _VECTORS]
        return np.concatenate(parts + [[ga, gb, gc]])

    def to_dict(self) -> dict:
        return {
            "model": "rnn",
            "n_qubits": self.n_qubits,
            "n_hidden": self.n_hidden,
            "params": self.flat().tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "RnnParams":
        if doc.get("model") != "rnn":
            raise ValueError("not an RNN checkpoint")
        return cls.zeros(doc["n_qubits"], doc["n_hidden"]).with_flat(doc["params"])


def hidden_states(p: RnnParams, sigma) -> list[np.ndarray]:
    return p.hidden_states(sigma)


def log_amplitude(p: RnnParams, sigma) -> complex:
    return complex(p.log_psi(_as_bits(sigma, p.n_qubits))[0])


def autoregressive_sample(p: RnnParams, count: int, seed=None) -> np.ndarray:
    """Exact samples from |psi|^2 by drawing one bit at a time; shape (count, N)."""
    rng = np.random.default_rng(seed)
    bits = np.zeros((count, p.n_qubits), dtype=np.int8)
    h = np.zeros((count, p.n_hidden))
    prev_bit = np.zeros(count)
    for j in range(p.n_qubits):
        h = np.tanh(h @ p.M.T + np.outer(prev_bit, p.p) + p.q)
        p_one = _sigmoid(h @ p.w + p.c)
        bits[:, j] = rng.random(count) < p_one
        prev_bit = bits[:, j].astype(float)
    return bits


def to_statevector(p: RnnParams, max_qubits: int = MAX_QUBITS) -> StateVector:
    if p.n_qubits > max_qubits:
        raise ValueError(f"{p.n_qubits} qubits exceeds enumeration cap {max_qubits}")
    return StateVector(p.n_qubits, np.exp(p.log_psi()))
