"""Error metrics and log-log power-law fits of sample complexity."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .pauli import MeasurementBasis, PauliHamiltonian
from .sampler import rotated_probabilities
from .statevec import DimensionError, GroundstateResult, StateVector, expectation, fidelity

METHODS = ("rbm", "rnn", "wavefunction", "shadows")
EPSILON_TOL = 1e-9


@dataclass
class ScalingRecord:
    method: str
    shots: int
    seed: int
    epsilon: float
    delta: float | None = None
    g_error: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.delta is None) != (self.method == "shadows"):
            raise ValueError("delta must be present exactly for state-producing methods")


@dataclass
class PowerLawFit:
    slope: float
    intercept: float
    r_squared: float


def epsilon(model_state: StateVector, h: PauliHamiltonian, exact: GroundstateResult) -> float:
    """Signed energy error <phi|H|phi> - E0."""
    if model_state.n_qubits != h.n_qubits:
        raise DimensionError("state and Hamiltonian sizes differ")
    return expectation(h, model_state) - exact.energy


def clamp_epsilon(value: float, tol: float = EPSILON_TOL) -> float:
    """Clamp a variational energy error at zero after checking it is not below -tol."""
    if value < -tol:
        raise ValueError(f"energy error {value:.3e} violates the variational bound")
    return max(value, 0.0)


def shadow_epsilon(estimate: float, exact: GroundstateResult) -> float:
    return abs(estimate - exact.energy)


def delta(model_state: StateVector, exact_state: StateVector) -> float:
    return 1.0 - fidelity(model_state, exact_state)


def generalization_error(model_state: StateVector, target_state: StateVector,
                         bases: Sequence[MeasurementBasis]) -> float:
    """Cross entropy of the model's basis distributions against the exact ones, averaged over K."""
    p = rotated_probabilities(target_state, bases)
    q = rotated_probabilities(model_state, bases)
    support = p > 0
    if np.any(support & (q <= 0)):
        return math.inf
    logq = np.log(np.where(support, q, 1.0))
    return float(-(p * logq).sum() / len(bases))


def entropy_H(target_state: StateVector, bases: Sequence[MeasurementBasis]) -> float:
    p = rotated_probabilities(target_state, bases)
    logp = np.log(np.where(p > 0, p, 1.0))
    return float(-(p * logp).sum() / len(bases))


def fit_power_law(points: Iterable[tuple[float, float]]) -> PowerLawFit:
    """Least squares of log10(S) on log10(quality); slope is dlogS/dlogquality."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("need at least 3 points")
    if np.any(pts <= 0) or not np.isfinite(pts).all():
        raise ValueError("power-law fit needs positive finite values")
    y, x = np.log10(pts[:, 0]), np.log10(pts[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (resid**2).sum() / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)))


def summarize(records: Sequence[ScalingRecord], method: str, quality: str = "epsilon"):
    """Per-S mean and standard error of the mean: list of (S, mean, sem, count)."""
    by_shots: dict[int, list[float]] = {}
    for r in records:
        if r.method == method and getattr(r, quality) is not None:
            by_shots.setdefault(r.shots, []).append(getattr(r, quality))
    out = []
    for s in sorted(by_shots):
        vals = np.array(by_shots[s])
        sem = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
        out.append((s, float(vals.mean()), float(sem), int(vals.size)))
    return out


def fit_records(records: Sequence[ScalingRecord], method: str,
                quality: str = "epsilon") -> PowerLawFit:
    return fit_power_law([(s, mean) for s, mean, _, _ in summarize(records, method, quality)])


RECORD_COLUMNS = ("method", "shots", "seed", "epsilon", "delta", "g_error")


def write_records(path, records: Sequence[ScalingRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_COLUMNS)
        writer.writeheader()
        for r in records:
            row = asdict(r)
            writer.writerow({k: "" if row[k] is None else row[k] for k in RECORD_COLUMNS})


def read_records(path) -> list[ScalingRecord]:
    def opt(x):
        return None if x in ("", None) else float(x)

    with open(path, newline="") as fh:
        return [
            ScalingRecord(row["method"], int(row["shots"]), int(row["seed"]), float(row["epsilon"]),
                          opt(row.get("delta")), opt(row.get("g_error")))
            for row in csv.DictReader(fh)
        ]


def quality_histogram(records: Sequence[ScalingRecord], quality: str = "epsilon",
                      bins: int = 20, method: str | None = None) -> list[dict]:
    """2D histogram over (S, log10 quality) bins.

    Each row keeps the sum of raw values so per-S means can be recovered.
    """
    rows = [r for r in records if (method is None or r.method == method)
            and getattr(r, quality) is not None and getattr(r, quality) > 0]
    if not rows:
        return []
    logs = np.log10([getattr(r, quality) for r in rows])
    lo, hi = logs.min(), logs.max()
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    out = []
    for s in sorted({r.shots for r in rows}):
        vals = np.array([getattr(r, quality) for r in rows if r.shots == s])
        which = np.clip(np.searchsorted(edges, np.log10(vals), side="right") - 1, 0, bins - 1)
        for b in range(bins):
            sel = which == b
            out.append({
                "shots": s, "quality": quality,
                "log10_lo": float(edges[b]), "log10_hi": float(edges[b + 1]),
                "count": int(sel.sum()), "sum": float(vals[sel].sum()),
            })
    return out
