"""Pauli strings, qubit Hamiltonians and qubit-wise commuting measurement bases.

Conventions: qubit 0 is the leftmost character of a Pauli or outcome string,
and the most significant bit of a basis-state index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PAULI_CHARS = frozenset("IXYZ")
BASIS_CHARS = frozenset("XYZ")


class HamiltonianFormatError(ValueError):
    """Raised when a Hamiltonian file cannot be parsed or validated."""


@dataclass(frozen=True)
class PauliTerm:
    ops: str
    coeff: float

    def __post_init__(self):
        if not self.ops or set(self.ops) - PAULI_CHARS:
            raise HamiltonianFormatError(f"invalid Pauli string {self.ops!r}")
        if not math.isfinite(self.coeff):
            raise HamiltonianFormatError(f"non-finite coefficient for {self.ops!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, op in enumerate(self.ops) if op != "I")

    @property
    def weight(self) -> int:
        return len(self.support)

    def is_identity(self) -> bool:
        return set(self.ops) == {"I"}


@dataclass(frozen=True)
class PauliHamiltonian:
    n_qubits: int
    terms: tuple[PauliTerm, ...]
    identity_offset: float = 0.0
    name: str = ""

    def __post_init__(self):
        if self.n_qubits < 1:
            raise HamiltonianFormatError("n_qubits must be positive")
        seen = set()
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise HamiltonianFormatError(
                    f"term {t.ops!r} has length {t.n_qubits}, expected {self.n_qubits}"
                )
            if t.is_identity():
                raise HamiltonianFormatError("identity term must live in identity_offset")
            if t.ops in seen:
                raise HamiltonianFormatError(f"duplicate term {t.ops!r}")
            seen.add(t.ops)
        if not math.isfinite(self.identity_offset):
            raise HamiltonianFormatError("non-finite identity offset")

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[str, float]], name: str = ""):
        """Build a Hamiltonian, merging duplicates and extracting the identity."""
        merged: dict[str, float] = {}
        offset = 0.0
        for ops, coeff in terms:
            coeff = float(coeff)
            PauliTerm(ops, coeff)  # validates characters and finiteness
            if len(ops) != n_qubits:
                raise HamiltonianFormatError(
                    f"term {ops!r} has length {len(ops)}, expected {n_qubits}"
                )
            if set(ops) == {"I"}:
                offset += coeff
            else:
                merged[ops] = merged.get(ops, 0.0) + coeff
        return cls(
            n_qubits,
            tuple(PauliTerm(ops, c) for ops, c in merged.items()),
            offset,
            name,
        )

    def to_dict(self) -> dict:
        terms = [["I" * self.n_qubits, self.identity_offset]] if self.identity_offset else []
        terms += [[t.ops, t.coeff] for t in self.terms]
        return {"name": self.name, "n": self.n_qubits, "terms": terms}

    def serialize(self) -> str:
        return json.dumps(self.to_dict())


def parse_hamiltonian(text: str) -> PauliHamiltonian:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise HamiltonianFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict) or "n" not in doc or "terms" not in doc:
        raise HamiltonianFormatError("expected an object with 'n' and 'terms'")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise HamiltonianFormatError(f"invalid qubit count {n!r}")
    pairs = []
    for entry in doc["terms"]:
        if (
            not isinstance(entry, (list, tuple))
            or len(entry) != 2
            or not isinstance(entry[0], str)
            or isinstance(entry[1], bool)
            or not isinstance(entry[1], (int, float))
        ):
            raise HamiltonianFormatError(f"malformed term entry {entry!r}")
        pairs.append((entry[0], entry[1]))
    return PauliHamiltonian.from_terms(n, pairs, name=str(doc.get("name", "")))


def load_hamiltonian(path) -> PauliHamiltonian:
    with open(path) as fh:
        return parse_hamiltonian(fh.read())


def tfim_chain(n: int, coupling: float = 1.0, field_strength: float = 1.0) -> PauliHamiltonian:
    """Open transverse-field Ising chain -J sum Z_i Z_{i+1} - h sum X_i."""
    terms = []
    for i in range(n - 1):
        ops = ["I"] * n
        ops[i] = ops[i + 1] = "Z"
        terms.append(("".join(ops), -coupling))
    for i in range(n):
        ops = ["I"] * n
        ops[i] = "X"
        terms.append(("".join(ops), -field_strength))
    return PauliHamiltonian.from_terms(n, terms, name=f"tfim{n}")


@dataclass(frozen=True)
class MeasurementBasis:
    ops: str
    covered_terms: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.ops or set(self.ops) - BASIS_CHARS:
            raise ValueError(f"measurement basis must be a full-weight Pauli string, got {self.ops!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    def covers(self, term: PauliTerm) -> bool:
        return qubit_wise_compatible(term.ops, self.ops)


def qubit_wise_compatible(a: str, b: str) -> bool:
    return len(a) == len(b) and all(x == "I" or y == "I" or x == y for x, y in zip(a, b))


def group_bases(h: PauliHamiltonian) -> list[MeasurementBasis]:
    """Greedy first-fit grouping of terms into qubit-wise commuting bases.

    Terms are visited in file order; each goes into the first open group whose
    fixed positions agree with it. Positions left free at the end become Z.
    """
    groups: list[tuple[list[str], list[int]]] = []
    for idx, term in enumerate(h.terms):
        for ops, members in groups:
            if all(t == "I" or o == "I" or t == o for t, o in zip(term.ops, ops)):
                for j, t in enumerate(term.ops):
                    if t != "I":
                        ops[j] = t
                members.append(idx)
                break
        else:
            groups.append((list(term.ops), [idx]))
    return [
        MeasurementBasis("".join("Z" if o == "I" else o for o in ops), tuple(members))
        for ops, members in groups
    ]


def term_eigenvalue(term: PauliTerm, basis: MeasurementBasis, outcome: str) -> int:
    if not basis.covers(term):
        raise ValueError(f"term {term.ops} is not measured by basis {basis.ops}")
    if len(outcome) != term.n_qubits:
        raise ValueError("outcome length does not match qubit count")
    flips = sum(outcome[j] == "1" for j in term.support)
    return -1 if flips % 2 else 1


def term_parities(term_ops: Sequence[str], n_qubits: int) -> np.ndarray:
    """Eigenvalue (+1/-1) of each term's measured string on every outcome index.

    Returns an array of shape (len(term_ops), 2**n_qubits).
    """
    idx = np.arange(2**n_qubits)
    out = np.empty((len(term_ops), idx.size))
    for r, ops in enumerate(term_ops):
        mask = support_mask(ops)
        out[r] = 1 - 2 * (popcount(idx & mask) & 1)
    return out


def support_mask(ops: str) -> int:
    n = len(ops)
    return sum(1 << (n - 1 - j) for j, op in enumerate(ops) if op != "I")


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def coverage_table(h: PauliHamiltonian, bases: list[MeasurementBasis]) -> str:
    lines = [
        f"name            {h.name or '-'}",
        f"qubits          {h.n_qubits}",
        f"pauli terms     {len(h.terms)}",
        f"identity offset {h.identity_offset:.12g}",
        f"bases (K)       {len(bases)}",
        "",
        f"{'k':>4}  {'basis':<{max(h.n_qubits, 5)}}  covered",
    ]
    for k, b in enumerate(bases):
        lines.append(f"{k:>4}  {b.ops:<{max(h.n_qubits, 5)}}  {len(b.covered_terms)}")
    return "\n".join(lines)
