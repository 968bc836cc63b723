"""Maximum-likelihood pure-state tomography by fixed-point iteration."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sampler import Dataset
from .statevec import StateVector
from .train import Objective


@dataclass
class FixedPointConfig:
    max_iterations: int = 10_000
    convergence_tol: float = 1e-10
    start: str = "exact_target"

    def __post_init__(self):
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.start not in ("exact_target", "supplied_state"):
            raise ValueError(f"unknown start {self.start!r}")


@dataclass
class TrajectoryRecord:
    iteration: int
    loss: float
    epsilon: float | None
    delta: float | None
    step_norm: float


@dataclass
class Trajectory:
    records: list[TrajectoryRecord] = field(default_factory=list)

    def append(self, rec: TrajectoryRecord):
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("trajectory records must be strictly ordered by iteration")
        self.records.append(rec)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([np.nan if r.epsilon is None else r.epsilon for r in self.records])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "loss", "epsilon", "delta", "step_norm"])
            for r in self.records:
                writer.writerow([r.iteration, repr(r.loss), _fmt(r.epsilon), _fmt(r.delta),
                                 repr(r.step_norm)])


def _fmt(x):
    return "" if x is None else repr(x)


@dataclass
class FixedPointResult:
    state: StateVector
    trajectory: Trajectory
    converged: bool
    iterations: int


def apply_T(state: StateVector, data: Dataset) -> StateVector:
    """(1/|D|) sum_k sum_s n_ks R_k|s> / <phi|R_k|s>, unnormalized."""
    obj = Objective(data)
    return StateVector(state.n_qubits, obj.imposition(np.asarray(state.amplitudes)), raw=True)


def smoothed_step(phi: np.ndarray, obj: Objective) -> np.ndarray:
    nxt = phi + obj.imposition(phi)
    return nxt / np.linalg.norm(nxt)


def _aligned(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    overlap = np.vdot(new, old)
    if abs(overlap) == 0:
        return new
    return new * (overlap / abs(overlap))


def iterate(
    start: StateVector,
    data: Dataset,
    cfg: FixedPointConfig | None = None,
    observe: Callable[[StateVector], tuple[float, float]] | None = None,
) -> FixedPointResult:
    """Apply the smoothed operator (phi + T phi)/|phi + T phi| until the step stalls.

    The step norm is measured after aligning the global phase of the new
    iterate to the old one. ``observe`` maps a state to (epsilon, delta) for
    the trajectory. Record 0 describes the starting state.
    """
    cfg = cfg or FixedPointConfig()
    obj = Objective(data)
    phi = np.asarray(start.amplitudes, dtype=complex)
    phi = phi / np.linalg.norm(phi)
    traj = Trajectory()

    def record(it, vec, step):
        eps = delta = None
        if observe is not None:
            eps, delta = observe(StateVector(start.n_qubits, vec))
        traj.append(TrajectoryRecord(it, obj.loss(vec), eps, delta, step))

    record(0, phi, 0.0)
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        nxt = _aligned(smoothed_step(phi, obj), phi)
        step = float(np.linalg.norm(nxt - phi))
        phi = nxt
        record(it, phi, step)
        if step < cfg.convergence_tol:
            converged = True
            break
    return FixedPointResult(StateVector(start.n_qubits, phi / np.linalg.norm(phi)), traj,
                            converged, it)


def loss_minimum_estimate(data: Dataset, target: StateVector,
                          cfg: FixedPointConfig | None = None) -> float:
    """Converged loss when iterating from the exact target state."""
    return float(iterate(target, data, cfg).trajectory.losses[-1])
