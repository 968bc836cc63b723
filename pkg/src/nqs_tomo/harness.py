"""Sample-complexity sweeps over methods, shot budgets and repetitions."""

from __future__ import annotations

import json
import logging
import os
import platform
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

from . import __version__, analysis, mle, rbm, rnn, sampler, shadows, train
from .analysis import ScalingRecord
from .pauli import PauliHamiltonian, group_bases, load_hamiltonian
from .statevec import groundstate

log = logging.getLogger(__name__)

RNG_SCHEME = "numpy-SeedSequence(base_seed,tag,shots,rep)/PCG64"
WORKERS_ENV = "NQS_TOMO_WORKERS"

DEFAULT_RBM = {"n_hidden": 3, "learning_rate": 3e-3, "epochs": 10_000}
DEFAULT_RNN = {"n_hidden": 4, "learning_rate": 1e-3, "epochs": 10_000}
DEFAULT_WAVEFUNCTION = {"max_iterations": 10_000, "convergence_tol": 1e-10}


def desk_grid() -> list[int]:
    return [int(round(10**e)) for e in (3.0, 3.5, 4.0, 4.5, 5.0)]


@dataclass
class SweepPlan:
    hamiltonian: Union[str, PauliHamiltonian]
    methods: list[str]
    shot_grid: list[int] = field(default_factory=desk_grid)
    repetitions: int = 20
    base_seed: int = 0
    rbm: dict = field(default_factory=dict)
    rnn: dict = field(default_factory=dict)
    wavefunction: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("plan has no methods")
        unknown = set(self.methods) - set(analysis.METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        grid = list(self.shot_grid)
        if not grid or any(s <= 0 for s in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("shot_grid must be strictly increasing and positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        self.rbm = {**DEFAULT_RBM, **self.rbm}
        self.rnn = {**DEFAULT_RNN, **self.rnn}
        self.wavefunction = {**DEFAULT_WAVEFUNCTION, **self.wavefunction}

    @classmethod
    def from_json(cls, text: str, base_dir: str = ".") -> "SweepPlan":
        doc = json.loads(text)
        ham = doc.pop("hamiltonian")
        if isinstance(ham, str) and not os.path.isabs(ham):
            ham = os.path.join(base_dir, ham)
        return cls(hamiltonian=ham, **doc)

    def load_hamiltonian(self) -> PauliHamiltonian:
        if isinstance(self.hamiltonian, PauliHamiltonian):
            return self.hamiltonian
        return load_hamiltonian(self.hamiltonian)

    def to_dict(self) -> dict:
        doc = asdict(self) if not isinstance(self.hamiltonian, PauliHamiltonian) else {
            **{k: v for k, v in asdict(self).items() if k != "hamiltonian"},
            "hamiltonian": self.hamiltonian.to_dict(),
        }
        return doc


@dataclass
class RunManifest:
    plan: dict
    records: list[ScalingRecord]
    wall_times: list[dict]
    failures: list[dict]
    summaries: dict
    fits: dict
    software_version: str = __version__
    rng_scheme: str = RNG_SCHEME
    platform: str = field(default_factory=platform.platform)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["records"] = [asdict(r) for r in self.records]
        return doc

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def read(cls, path) -> "RunManifest":
        with open(path) as fh:
            doc = json.load(fh)
        doc["records"] = [ScalingRecord(**r) for r in doc["records"]]
        return cls(**doc)


def child_seed(base_seed: int, tag: str, shots: int, rep: int) -> int:
    """Order-independent 64-bit seed for one (tag, S, repetition) cell."""
    seq = np.random.SeedSequence([base_seed, zlib.crc32(tag.encode()), shots, rep])
    return int(seq.generate_state(1, np.uint64)[0])


class _Context:
    """Per-sweep shared state: Hamiltonian, bases and exact groundstate."""

    def __init__(self, plan: SweepPlan):
        self.plan = plan
        self.h = plan.load_hamiltonian()
        self.bases = group_bases(self.h)
        self.exact = groundstate(self.h)
        self.entropy = analysis.entropy_H(self.exact.state, self.bases)

    def state_record(self, method, shots, seed, state) -> ScalingRecord:
        eps = analysis.clamp_epsilon(analysis.epsilon(state, self.h, self.exact))
        g = analysis.generalization_error(state, self.exact.state, self.bases)
        return ScalingRecord(method, shots, seed, eps, analysis.delta(state, self.exact.state),
                             g - self.entropy)

    def dataset(self, shots, rep) -> sampler.Dataset:
        # datasets are shared across methods at the same (S, rep)
        seed = child_seed(self.plan.base_seed, "dataset", shots, rep)
        return sampler.sample_dataset(self.exact.state, self.bases, shots, seed)

    def run(self, method: str, shots: int, rep: int) -> ScalingRecord:
        plan = self.plan
        seed = child_seed(plan.base_seed, method, shots, rep)
        if method == "shadows":
            table = shadows.shadow_table(self.exact.state, shots, seed)
            est = shadows.estimate_energy(self.h, table)
            return ScalingRecord("shadows", shots, seed, analysis.shadow_epsilon(est.energy, self.exact))
        data = self.dataset(shots, rep)
        if method == "wavefunction":
            cfg = mle.FixedPointConfig(**plan.wavefunction)
            result = mle.iterate(self.exact.state, data, cfg)
            return self.state_record(method, shots, seed, result.state)
        opts = plan.rbm if method == "rbm" else plan.rnn
        cfg = train.TrainConfig(learning_rate=opts["learning_rate"], epochs=int(opts["epochs"]),
                                seed=seed)
        if method == "rbm":
            init = rbm.RbmParams.random(self.h.n_qubits, opts["n_hidden"], seed=seed)
        else:
            init = rnn.RnnParams.random(self.h.n_qubits, opts["n_hidden"], seed=seed)
        fitted = train.fit(init, data, cfg)
        return self.state_record(method, shots, seed, train.model_statevector(fitted.model))


_WORKER_CTX: _Context | None = None


def _init_worker(plan: SweepPlan):
    global _WORKER_CTX
    _WORKER_CTX = _Context(plan)


def _run_cell(cell):
    method, shots, rep = cell
    start = time.perf_counter()
    try:
        rec = _WORKER_CTX.run(method, shots, rep)
        err = None
    except Exception as exc:  # recorded, the sweep continues
        rec, err = None, f"{type(exc).__name__}: {exc}"
    return cell, rec, err, time.perf_counter() - start


def run_sweep(plan: SweepPlan, workers: int | None = None) -> RunManifest:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    cells = [(m, s, r) for m in plan.methods for s in plan.shot_grid
             for r in range(plan.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(plan,)) as pool:
            results = list(pool.map(_run_cell, cells, chunksize=4))
    else:
        _init_worker(plan)
        results = [_run_cell(c) for c in cells]
    return _assemble(plan, results)


def _assemble(plan: SweepPlan, results) -> RunManifest:
    records, times, failures = [], [], []
    for (method, shots, rep), rec, err, wall in results:
        times.append({"method": method, "shots": shots, "rep": rep, "seconds": wall})
        if err is not None:
            failures.append({"method": method, "shots": shots, "rep": rep, "error": err})
            log.warning("run %s S=%d rep=%d failed: %s", method, shots, rep, err)
        else:
            records.append(rec)
    summaries, fits = {}, {}
    for method in plan.methods:
        qualities = ("epsilon",) if method == "shadows" else ("epsilon", "delta")
        summaries[method], fits[method] = {}, {}
        for q in qualities:
            summary = analysis.summarize(records, method, q)
            summaries[method][q] = [
                {"shots": s, "mean": m, "sem": e, "count": n} for s, m, e, n in summary
            ]
            try:
                fits[method][q] = asdict(analysis.fit_power_law([(s, m) for s, m, _, _ in summary]))
            except ValueError as exc:
                fits[method][q] = {"error": str(exc)}
    return RunManifest(plan.to_dict(), records, times, failures, summaries, fits)


def emit_histograms(manifest: RunManifest, bins: int = 20) -> list[dict]:
    """Rows of (method, S, quality bin) counts for distribution plots."""
    rows = []
    methods = sorted({r.method for r in manifest.records})
    for method in methods:
        for q in ("epsilon", "delta"):
            for row in analysis.quality_histogram(manifest.records, q, bins, method):
                rows.append({"method": method, **row})
    return rows


def emit_trajectory_comparison(h: PauliHamiltonian, start_state, data: sampler.Dataset,
                               cfg: mle.FixedPointConfig | None = None) -> list[dict]:
    """Fixed-point trajectory from a supplied state, with the loss-minimum reference."""
    exact = groundstate(h)

    def observe(state):
        return (analysis.epsilon(state, h, exact), analysis.delta(state, exact.state))

    result = mle.iterate(start_state, data, cfg, observe=observe)
    loss_min = mle.loss_minimum_estimate(data, exact.state, cfg)
    return [
        {"iter": r.iteration, "loss": r.loss, "epsilon": r.epsilon, "delta": r.delta,
         "step_norm": r.step_norm, "loss_min": loss_min}
        for r in result.trajectory.records
    ]


GNUPLOT_SCALING = """\
set logscale xy
set xlabel "{quality}"
set ylabel "S"
set datafile separator ","
plot "{path}" using 3:2 with points title "{method}"
"""


def gnuplot_script(path: str, method: str, quality: str = "epsilon") -> str:
    return GNUPLOT_SCALING.format(path=path, method=method, quality=quality)
