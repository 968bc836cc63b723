"""Multi-basis cross-entropy loss, its gradient, and full-batch Adam training."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from . import rbm, rnn
from .rbm import RbmParams
from .rnn import RnnParams
from .sampler import Dataset
from .statevec import StateVector, bitstring, rotate_batch, rotation_stack

log = logging.getLogger(__name__)

Model = Union[RbmParams, RnnParams, StateVector]

PROB_FLOOR = 1e-300


class ZeroProbabilityError(ArithmeticError):
    """The model gives (numerically) zero probability to an observed outcome."""

    def __init__(self, basis_index: int, sigma: str):
        super().__init__(f"zero model probability for outcome {sigma} in basis {basis_index}")
        self.basis_index = basis_index
        self.sigma = sigma


class TrainingDiverged(RuntimeError):
    def __init__(self, message, last_good, history):
        super().__init__(message)
        self.last_good = last_good
        self.history = history


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 10_000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    gradient_check: bool = False
    checkpoint_every: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class LossReport:
    loss: float
    per_basis_loss: list[float]
    epoch: int = 0


@dataclass
class FitResult:
    model: Model
    history: list[dict] = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        return np.array([row["loss"] for row in self.history])


def model_amplitudes(model: Model) -> np.ndarray:
    """Amplitude vector over all configurations, up to a positive scale factor."""
    if isinstance(model, StateVector):
        return np.asarray(model.amplitudes)
    logs = model.log_psi()
    return np.exp(logs - logs.real.max())


def model_statevector(model: Model) -> StateVector:
    if isinstance(model, StateVector):
        return model
    if isinstance(model, RbmParams):
        return rbm.to_statevector(model)
    return rnn.to_statevector(model)


class Objective:
    """Dataset-bound loss; caches the rotation factors and weights."""

    def __init__(self, data: Dataset):
        self.total = float(data.counts.sum())
        if self.total <= 0:
            raise ValueError("empty dataset")
        self.n_qubits = data.n_qubits
        self.counts = np.asarray(data.counts, dtype=float)
        self.observed = self.counts > 0
        self.factors = rotation_stack(data.bases)

    def rotated(self, psi: np.ndarray) -> np.ndarray:
        k = self.counts.shape[0]
        return rotate_batch(np.broadcast_to(psi, (k, psi.size)), self.factors)

    def _check(self, probs: np.ndarray):
        bad = self.observed & (probs < PROB_FLOOR)
        if bad.any():
            k, i = np.argwhere(bad)[0]
            raise ZeroProbabilityError(int(k), bitstring(int(i), self.n_qubits))

    def per_basis(self, psi: np.ndarray) -> np.ndarray:
        rot = self.rotated(psi)
        probs = np.abs(rot) ** 2 / np.vdot(psi, psi).real
        self._check(probs)
        logp = np.log(np.where(self.observed, probs, 1.0))
        return -(self.counts * logp).sum(axis=1) / self.total

    def loss(self, psi: np.ndarray) -> float:
        return float(self.per_basis(psi).sum())

    def imposition(self, psi: np.ndarray, rot: np.ndarray | None = None) -> np.ndarray:
        """(1/|D|) sum_k R_k (n_k / conj(R_k^dagger psi)), the data-driven operator T."""
        if rot is None:
            rot = self.rotated(psi)
        probs = np.abs(rot) ** 2 / np.vdot(psi, psi).real
        self._check(probs)
        ratio = np.zeros_like(rot)
        np.divide(self.counts, rot.conj(), out=ratio, where=self.observed)
        return rotate_batch(ratio, self.factors, adjoint=True).sum(axis=0) / self.total

    def loss_and_conj_grad(self, psi: np.ndarray):
        """Loss and dL/dpsi* for an unnormalized amplitude vector."""
        rot = self.rotated(psi)
        z = np.vdot(psi, psi).real
        probs = np.abs(rot) ** 2 / z
        self._check(probs)
        logp = np.log(np.where(self.observed, probs, 1.0))
        value = float(-(self.counts * logp).sum() / self.total)
        return value, psi / z - self.imposition(psi, rot)

    def loss_and_grad(self, model: Model):
        psi = model_amplitudes(model)
        value, g = self.loss_and_conj_grad(psi)
        if isinstance(model, StateVector):
            return value, np.concatenate([2 * g.real, 2 * g.imag])
        return value, model.backprop(g.conj() * psi)


def loss(model: Model, data: Dataset, epoch: int = 0) -> LossReport:
    per = Objective(data).per_basis(model_amplitudes(model))
    return LossReport(float(per.sum()), per.tolist(), epoch)


def gradient(model: Model, data: Dataset) -> np.ndarray:
    """dL/dlambda over the model's flat real parameter vector.

    For an explicit StateVector the parameters are (Re psi, Im psi) of the raw
    amplitude vector.
    """
    return Objective(data).loss_and_grad(model)[1]


def empirical_entropy(data: Dataset) -> float:
    """Lower bound of the loss: -(1/|D|) sum_k sum_s n log(n / |D_k|)."""
    counts = np.asarray(data.counts, dtype=float)
    per_basis = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, counts * np.log(counts / per_basis), 0.0)
    return float(-terms.sum() / counts.sum())


def finite_difference_gradient(model, data: Dataset, step: float = 1e-5) -> np.ndarray:
    obj = Objective(data)
    x0 = _flat(model)
    out = np.empty_like(x0)
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += step
        xm[i] -= step
        out[i] = (obj.loss(model_amplitudes(_unflat(model, xp)))
                  - obj.loss(model_amplitudes(_unflat(model, xm)))) / (2 * step)
    return out


def _flat(model: Model) -> np.ndarray:
    if isinstance(model, StateVector):
        return np.concatenate([model.amplitudes.real, model.amplitudes.imag])
    return model.flat()


def _unflat(model: Model, vec: np.ndarray) -> Model:
    if isinstance(model, StateVector):
        half = vec.size // 2
        return StateVector(model.n_qubits, vec[:half] + 1j * vec[half:], raw=True)
    return model.with_flat(vec)


class Adam:
    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


def fit(
    model_init: Model,
    data: Dataset,
    cfg: TrainConfig,
    monitor: Callable[[Model], tuple[float, float]] | None = None,
) -> FitResult:
    """Full-batch training: one optimizer step per epoch over the histogram weights.

    ``monitor`` maps a model to (epsilon, delta); it is called every
    ``cfg.checkpoint_every`` epochs and on the final model.
    """
    if isinstance(model_init, StateVector):
        raise TypeError("fit trains RBM or RNN parameters; use mle.iterate for explicit states")
    obj = Objective(data)
    if cfg.gradient_check:
        analytic = obj.loss_and_grad(model_init)[1]
        numeric = finite_difference_gradient(model_init, data)
        if not np.allclose(analytic, numeric, rtol=1e-4, atol=1e-8):
            raise AssertionError("analytic gradient disagrees with finite differences")
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
    model = model_init
    x = model.flat()
    history: list[dict] = []
    for epoch in range(cfg.epochs):
        try:
            value, grad = obj.loss_and_grad(model)
        except ZeroProbabilityError as exc:
            raise TrainingDiverged(str(exc), model, history) from exc
        if not (np.isfinite(value) and np.isfinite(grad).all()):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", model, history)
        row = {"epoch": epoch, "loss": value}
        if monitor is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            row["epsilon"], row["delta"] = monitor(model)
        history.append(row)
        x = opt.step(x, grad) if cfg.optimizer == "adam" else x - cfg.learning_rate * grad
        try:
            model = model.with_flat(x)
        except ValueError as exc:
            raise TrainingDiverged(str(exc), model, history) from exc
    final = {"epoch": cfg.epochs, "loss": obj.loss(model_amplitudes(model))}
    if monitor is not None:
        final["epsilon"], final["delta"] = monitor(model)
    history.append(final)
    log.debug("trained %d epochs, final loss %.6g", cfg.epochs, final["loss"])
    return FitResult(model, history)


def save_checkpoint(path, model: RbmParams | RnnParams) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_checkpoint(path) -> RbmParams | RnnParams:
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("model")
    if kind == "rbm":
        return RbmParams.from_dict(doc)
    if kind == "rnn":
        return RnnParams.from_dict(doc)
    raise ValueError(f"{path}: unknown model type {kind!r}")
