"""Synthetic projective-measurement datasets drawn with the Born rule."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pauli import MeasurementBasis
from .statevec import StateVector, bitstring, rotate_batch, rotation_stack

DATASET_FORMAT = "nqs-dataset"
DATASET_VERSION = 1


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    """Per-basis outcome histograms.

    ``counts[k, i]`` is the number of times outcome index ``i`` was observed in
    basis ``k``. Counts may be non-integer weights for probability-weighted
    ("infinite data") datasets.
    """

    n_qubits: int
    bases: tuple[MeasurementBasis, ...]
    counts: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        counts = np.array(self.counts, dtype=float if self.is_weighted(self.counts) else np.int64)
        if counts.shape != (len(self.bases), 2**self.n_qubits):
            raise ValueError(f"counts shape {counts.shape} does not match bases and qubits")
        if np.any(counts < 0):
            raise ValueError("negative counts")
        counts.setflags(write=False)
        object.__setattr__(self, "bases", tuple(self.bases))
        object.__setattr__(self, "counts", counts)

    @staticmethod
    def is_weighted(counts) -> bool:
        arr = np.asarray(counts)
        return not np.issubdtype(arr.dtype, np.integer) and not np.all(arr == np.round(arr))

    @property
    def total_shots(self):
        total = self.counts.sum()
        return int(total) if np.issubdtype(self.counts.dtype, np.integer) else float(total)

    @property
    def histograms(self) -> list[dict[str, float]]:
        return [
            {bitstring(int(i), self.n_qubits): row[i].item() for i in np.flatnonzero(row)}
            for row in self.counts
        ]

    def __eq__(self, other):
        return (
            isinstance(other, Dataset)
            and self.n_qubits == other.n_qubits
            and self.seed == other.seed
            and self.bases == other.bases
            and self.counts.dtype == other.counts.dtype
            and np.array_equal(self.counts, other.counts)
        )

    __hash__ = None


def _check_target(target: StateVector, bases: Sequence[MeasurementBasis]):
    for b in bases:
        if b.n_qubits != target.n_qubits:
            raise ValueError(f"basis {b.ops} does not match {target.n_qubits} qubits")


def rotated_probabilities(target: StateVector, bases: Sequence[MeasurementBasis]) -> np.ndarray:
    """Born probabilities |<s|R_k^dagger|psi>|^2, shape (K, 2**N)."""
    _check_target(target, bases)
    k = len(bases)
    rotated = rotate_batch(np.broadcast_to(target.amplitudes, (k, target.amplitudes.size)),
                           rotation_stack(bases))
    probs = np.abs(rotated) ** 2
    return probs / probs.sum(axis=1, keepdims=True)


def exact_distribution(target: StateVector, basis: MeasurementBasis) -> dict[str, float]:
    probs = rotated_probabilities(target, [basis])[0]
    return {bitstring(i, target.n_qubits): float(p) for i, p in enumerate(probs) if p > 0}


def exact_dataset(target: StateVector, bases: Sequence[MeasurementBasis]) -> Dataset:
    """Probability-weighted dataset: each basis carries its exact Born weights."""
    probs = rotated_probabilities(target, bases)
    probs[probs < 1e-300] = 0.0
    return Dataset(target.n_qubits, tuple(bases), probs.astype(float))


def sample_dataset(
    target: StateVector, bases: Sequence[MeasurementBasis], shots: int, seed: int
) -> Dataset:
    """Draw ``shots`` outcomes, each in a uniformly chosen basis.

    The per-basis shot numbers are a uniform multinomial draw; outcomes within
    basis k use child stream k of the seed.
    """
    if not bases:
        raise ValueError("no measurement bases")
    if shots < 1:
        raise ValueError("shots must be at least 1")
    root = np.random.SeedSequence(seed)
    alloc_seq, *basis_seqs = root.spawn(len(bases) + 1)
    per_basis = np.random.Generator(np.random.PCG64(alloc_seq)).multinomial(
        shots, np.full(len(bases), 1 / len(bases))
    )
    probs = rotated_probabilities(target, bases)
    counts = np.zeros(probs.shape, dtype=np.int64)
    for k, (n_k, seq) in enumerate(zip(per_basis, basis_seqs)):
        if n_k:
            counts[k] = np.random.Generator(np.random.PCG64(seq)).multinomial(n_k, probs[k])
    return Dataset(target.n_qubits, tuple(bases), counts, seed)


def save_dataset(path, data: Dataset) -> None:
    header = {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "n": data.n_qubits,
        "shots": data.total_shots,
        "seed": data.seed,
        "weighted": not np.issubdtype(data.counts.dtype, np.integer),
        "bases": [{"ops": b.ops, "covered": list(b.covered_terms)} for b in data.bases],
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for k, row in enumerate(data.counts):
            for i in np.flatnonzero(row):
                line = {"k": k, "sigma": bitstring(int(i), data.n_qubits), "count": row[i].item()}
                fh.write(json.dumps(line) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        lines = fh.read().splitlines()
    try:
        header = json.loads(lines[0])
    except (IndexError, json.JSONDecodeError) as exc:
        raise DatasetFormatError(f"{path}: missing or corrupt header") from exc
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise DatasetFormatError(f"{path}: not a dataset file")
    if header.get("version") != DATASET_VERSION:
        raise DatasetFormatError(f"{path}: unsupported dataset version {header.get('version')!r}")
    n = header["n"]
    bases = tuple(MeasurementBasis(b["ops"], tuple(b["covered"])) for b in header["bases"])
    counts = np.zeros((len(bases), 2**n), dtype=float if header["weighted"] else np.int64)
    try:
        for line in lines[1:]:
            if not line.strip():
                continue
            rec = json.loads(line)
            sigma = rec["sigma"]
            if len(sigma) != n or set(sigma) - {"0", "1"} or rec["count"] <= 0:
                raise DatasetFormatError(f"{path}: bad record {line!r}")
            counts[rec["k"], int(sigma, 2)] = rec["count"]
    except (json.JSONDecodeError, KeyError, IndexError, TypeError) as exc:
        raise DatasetFormatError(f"{path}: corrupt record") from exc
    data = Dataset(n, bases, counts, header["seed"])
    if data.total_shots != header["shots"]:
        raise DatasetFormatError(f"{path}: shot total does not match header")
    return data
