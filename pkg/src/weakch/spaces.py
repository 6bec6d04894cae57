"""Finite classical probability spaces: atoms, events, partitions, conditioning.

The substrate for every model in this package. Atoms are hashable labels
carrying nonnegative weights; construction normalizes the weights so the
total mass is one. Events are sets of atom labels, partitions are disjoint
covers. Everything is immutable after construction and every operation is
a pure function, so values can be shared freely between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

ATOL = 1e-12


class WeakChError(Exception):
    """Base class for domain errors raised by this package."""


class EmptySpace(WeakChError):
    """No atoms were supplied, or the total mass is zero."""


class NegativeWeight(WeakChError):
    """An atom weight is negative."""


class ForeignEvent(WeakChError):
    """An event references an atom label that is not in the space."""


class ZeroConditioner(WeakChError):
    """The conditioning event has zero probability."""


class BadPartition(WeakChError):
    """Partition cells overlap or fail to cover the atom set."""


@dataclass(frozen=True, eq=False)
class FiniteProbSpace:
    """Ordered atom labels with normalized nonnegative weights.

    Construction normalizes the weights (divides by the total) rather than
    rejecting inputs that do not sum to one; downstream searches perturb
    weights and need cheap re-projection. Individual weights may be zero,
    but the total mass must be positive.
    """

    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(atoms) == 0:
            raise EmptySpace("a probability space needs at least one atom")
        if w.size != len(atoms):
            raise EmptySpace(
                f"{len(atoms)} atoms but {w.size} weights were supplied"
            )
        if len(set(atoms)) != len(atoms):
            raise WeakChError("atom labels must be unique")
        if np.any(w < 0.0):
            worst = float(w.min())
            raise NegativeWeight(f"negative atom weight {worst}")
        total = math.fsum(w.tolist())
        if total <= 0.0:
            raise EmptySpace("total mass must be positive")
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "_index", {a: i for i, a in enumerate(atoms)})

    def __len__(self) -> int:
        return len(self.atoms)

    def full_event(self) -> frozenset:
        return frozenset(self.atoms)


def make_space(weights: Sequence[float], atoms: Sequence[Hashable] | None = None) -> FiniteProbSpace:
    """Build a space from raw nonnegative weights, normalizing the total.

    Atom labels default to 0..n-1.
    """
    w = np.asarray(list(weights), dtype=float)
    if atoms is None:
        atoms = tuple(range(w.size))
    return FiniteProbSpace(tuple(atoms), w)


def _event_indices(space: FiniteProbSpace, event: Iterable[Hashable]) -> list[int]:
    index = space._index
    out = []
    for label in event:
        try:
            out.append(index[label])
        except KeyError:
            raise ForeignEvent(f"atom {label!r} is not in the space") from None
    out.sort()
    return out


def prob(space: FiniteProbSpace, event: Iterable[Hashable]) -> float:
    """Probability of an event, the mass of its member atoms.

    Summation runs in atom order so that identical atom sets always produce
    bit-identical sums.
    """
    idx = _event_indices(space, frozenset(event))
    w = space.weights
    return math.fsum(w[i] for i in idx)


def complement(space: FiniteProbSpace, event: Iterable[Hashable]) -> frozenset:
    ev = frozenset(event)
    _event_indices(space, ev)
    return frozenset(space.atoms) - ev


def cond_prob(space: FiniteProbSpace, event: Iterable[Hashable], given: Iterable[Hashable]) -> float:
    """p(event | given) = p(event and given) / p(given).

    Raises ZeroConditioner when the conditioning event has no mass. The
    resulting map over events is itself a probability measure.
    """
    ev = frozenset(event)
    gv = frozenset(given)
    _event_indices(space, ev)
    pg = prob(space, gv)
    if pg <= 0.0:
        raise ZeroConditioner("cannot condition on an event of zero probability")
    return prob(space, ev & gv) / pg


def check_partition(space: FiniteProbSpace, cells: Sequence[Iterable[Hashable]]) -> tuple[frozenset, ...]:
    """Validate that cells are pairwise disjoint and cover the atom set."""
    out = []
    seen: set = set()
    count = 0
    for cell in cells:
        fs = frozenset(cell)
        _event_indices(space, fs)
        if seen & fs:
            raise BadPartition("partition cells overlap")
        seen |= fs
        count += len(fs)
        out.append(fs)
    if count != len(space.atoms) or seen != set(space.atoms):
        raise BadPartition("partition cells do not cover the atom set")
    return tuple(out)


@dataclass(frozen=True)
class ScreeningReport:
    """Per-cell factorization residuals p(AB|C_i) - p(A|C_i) p(B|C_i).

    Cells of zero mass cannot be conditioned on; they are skipped and listed
    rather than raised, since a vanishing cell makes the condition vacuous.
    """

    residuals: tuple[float, ...]
    cell_indices: tuple[int, ...]
    skipped_cells: tuple[int, ...]

    @property
    def max_abs(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)


@dataclass(frozen=True)
class ResidualReport:
    """Labeled residuals from an assumption validator, plus skipped entries."""

    labels: tuple[str, ...]
    residuals: tuple[float, ...]
    skipped: tuple[str, ...]

    @property
    def max_abs(self) -> float:
        return max((abs(r) for r in self.residuals), default=0.0)

    def worst(self) -> tuple[str, float] | None:
        if not self.residuals:
            return None
        k = max(range(len(self.residuals)), key=lambda i: abs(self.residuals[i]))
        return self.labels[k], self.residuals[k]


def screening_residuals(
    space: FiniteProbSpace,
    event_a: Iterable[Hashable],
    event_b: Iterable[Hashable],
    cells: Sequence[Iterable[Hashable]],
) -> ScreeningReport:
    """Factorization residuals of A and B inside each cell of a partition.

    For each positive-mass cell C_i returns
    p(AB|C_i) - p(A|C_i) p(B|C_i). A cell that makes A or B conditionally
    deterministic contributes an exact zero.
    """
    part = check_partition(space, cells)
    a = frozenset(event_a)
    b = frozenset(event_b)
    _event_indices(space, a)
    _event_indices(space, b)
    residuals = []
    active = []
    skipped = []
    for i, cell in enumerate(part):
        pc = prob(space, cell)
        if pc <= 0.0:
            skipped.append(i)
            continue
        pab = prob(space, a & b & cell) / pc
        pa = prob(space, a & cell) / pc
        pb = prob(space, b & cell) / pc
        residuals.append(pab - pa * pb)
        active.append(i)
    return ScreeningReport(tuple(residuals), tuple(active), tuple(skipped))


def space_to_dict(space: FiniteProbSpace) -> dict:
    return {"atoms": list(space.atoms), "weights": [float(x) for x in space.weights]}


def space_from_dict(data: dict) -> FiniteProbSpace:
    atoms = data["atoms"]
    return FiniteProbSpace(tuple(atoms), np.asarray(data["weights"], dtype=float))
