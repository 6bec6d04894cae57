"""Verification engines for separate-common-cause models.

Two kinds of model live here.

PairwiseCcModel is a single correlated pair of events together with a
partition that screens the correlation off cell by cell. Near-perfect
correlation with deficit eps forces almost all mass into cells that make
the outcome nearly certain or nearly impossible; the checker verifies the
resulting sandwich

    high_mass - sqrt(eps) <= p(A) < high_mass + 4*sqrt(eps) - 2*eps

where high_mass is the total weight of cells with p(A|C_i) >= 1 - sqrt(eps),
together with the bookkeeping identities behind it.

EprbModel is a full joint distribution over two Alice settings, two Bob
settings, both outcomes, and four per-direction cause variables. Validators
cover locality (a far setting never shifts a near outcome given the near
cause), setting independence of the causes, and screening by the
partner-direction partitions. The joint-cause checker verifies that the
probability of both aggregate causes stays inside the correction-term
interval around p(+,+|ab).

The 16-atom enumeration oracle for the CH expression also lives here: it
computes the six marginals from an explicit distribution over the four
events and their complements, and cross-checks the expression against the
complement-sum identity that proves the [-1, 0] range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import singlet
from .inequalities import (
    SettingProbs,
    WeakChReport,
    correction_terms,
    evaluate_weak_ch,
    weak_ch_bounds,
)
from .spaces import (
    FiniteProbSpace,
    ResidualReport,
    ScreeningReport,
    WeakChError,
    check_partition,
    cond_prob,
    prob,
    screening_residuals,
    space_from_dict,
    space_to_dict,
)

PRECONDITION_TOL = 1e-9


class PreconditionViolated(WeakChError):
    """A checker's statistical precondition fails beyond tolerance."""


class GenerationFailed(WeakChError):
    """The random model generator could not satisfy its target."""


class UnnormalizedInput(WeakChError):
    """An explicit atom distribution is not normalized."""


class BadModel(WeakChError):
    """A model's structural invariants are violated."""


# ---------------------------------------------------------------------------
# Pairwise models: one correlation, one screening partition
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairwiseCcModel:
    """A probability space, two events, and a partition meant to screen them."""

    space: FiniteProbSpace
    event_a: frozenset
    event_b: frozenset
    cells: tuple[frozenset, ...]

    def __post_init__(self):
        cells = check_partition(self.space, self.cells)
        a = frozenset(self.event_a)
        b = frozenset(self.event_b)
        for ev in (a, b):
            if not ev <= set(self.space.atoms):
                raise BadModel("events must be subsets of the atom set")
        object.__setattr__(self, "event_a", a)
        object.__setattr__(self, "event_b", b)
        object.__setattr__(self, "cells", cells)

    def screening(self) -> ScreeningReport:
        return screening_residuals(self.space, self.event_a, self.event_b, self.cells)


@dataclass(frozen=True)
class CellStats:
    """Per-cell mass and conditionals, for the positive-mass cells."""

    index: tuple[int, ...]
    mass: np.ndarray
    cond_a: np.ndarray
    cond_b: np.ndarray
    skipped: tuple[int, ...]


def cell_stats(model: PairwiseCcModel) -> CellStats:
    space = model.space
    w = space.weights
    ix = space._index
    a_idx = {ix[x] for x in model.event_a}
    b_idx = {ix[x] for x in model.event_b}
    index, mass, ca, cb, skipped = [], [], [], [], []
    for i, cell in enumerate(model.cells):
        cix = sorted(ix[x] for x in cell)
        m = float(sum(w[k] for k in cix))
        if m <= 0.0:
            skipped.append(i)
            continue
        pa = float(sum(w[k] for k in cix if k in a_idx))
        pb = float(sum(w[k] for k in cix if k in b_idx))
        index.append(i)
        mass.append(m)
        ca.append(pa / m)
        cb.append(pb / m)
    return CellStats(
        index=tuple(index),
        mass=np.asarray(mass),
        cond_a=np.asarray(ca),
        cond_b=np.asarray(cb),
        skipped=tuple(skipped),
    )


@dataclass(frozen=True)
class CellClasses:
    """Cells split by how decisively they fix the first outcome.

    low:  p(A|C_i) <= border (zero-mass cells land here by convention)
    high: p(A|C_i) >= 1 - border
    mid:  strictly between

    When the two cutoffs overlap (eps >= 1/4) a cell satisfying both tests
    counts as low. The border defaults to sqrt(eps) but is configurable,
    since tighter borders tighten the resulting constraints.
    """

    high: tuple[int, ...]
    mid: tuple[int, ...]
    low: tuple[int, ...]
    epsilon: float
    border: float


def model_epsilon(model: PairwiseCcModel) -> float:
    """Correlation deficit 1 - p(A|B), clamped at zero against rounding."""
    return max(0.0, 1.0 - cond_prob(model.space, model.event_a, model.event_b))


def _require_screened_even_model(model: PairwiseCcModel, tol: float) -> ScreeningReport:
    scr = model.screening()
    if scr.max_abs > tol:
        raise PreconditionViolated(
            f"screening residual {scr.max_abs:.3e} exceeds {tol:.1e}"
        )
    for name, ev in (("p(A)", model.event_a), ("p(B)", model.event_b)):
        v = prob(model.space, ev)
        if abs(v - 0.5) > tol:
            raise PreconditionViolated(f"{name} = {v!r} is not 1/2 within {tol:.1e}")
    return scr


def classify_cells(
    model: PairwiseCcModel,
    *,
    border: float | None = None,
    precondition_tol: float = PRECONDITION_TOL,
) -> CellClasses:
    """Trichotomy of partition cells by their conditional p(A|C_i).

    Requires an exactly screened model with even marginals, within
    precondition_tol.
    """
    _require_screened_even_model(model, precondition_tol)
    eps = model_epsilon(model)
    b = math.sqrt(eps) if border is None else float(border)
    stats = cell_stats(model)
    high, mid, low = [], [], list(stats.skipped)
    for i, q in zip(stats.index, stats.cond_a):
        if q <= b:
            low.append(i)
        elif q >= 1.0 - b:
            high.append(i)
        else:
            mid.append(i)
    return CellClasses(
        high=tuple(sorted(high)),
        mid=tuple(sorted(mid)),
        low=tuple(sorted(low)),
        epsilon=eps,
        border=b,
    )


@dataclass(frozen=True)
class CauseMassReport:
    """Result of the near-deterministic-cell mass bounds check.

    diagnostics holds the bookkeeping sums behind the proof of the bounds:

    a_not_b_mass  sum of p(A|C_i)(1 - p(B|C_i)) p(C_i), equal to eps/2
    b_not_a_mass  the mirrored sum, also eps/2
    mid_gap_sum   sum over mid cells of |p(A|C_i) - p(B|C_i)| p(C_i), <= eps
    wide_mid_mass mass of mid cells whose conditional gap reaches the
                  gap border (default sqrt(eps)/2), <= 2*sqrt(eps)

    The upper bound is strict in exact arithmetic but unattainable at
    eps = 0 where equality holds, so it is checked non-strictly with a
    small tolerance.
    """

    epsilon: float
    border: float
    high_cells: tuple[int, ...]
    mid_cells: tuple[int, ...]
    low_cells: tuple[int, ...]
    high_mass: float
    p_a: float
    p_b: float
    lower_ok: bool
    upper_ok: bool
    diagnostics: dict

    @property
    def ok(self) -> bool:
        return self.lower_ok and self.upper_ok


def check_cause_mass_bounds(
    model: PairwiseCcModel,
    *,
    border: float | None = None,
    gap_border: float | None = None,
    precondition_tol: float = PRECONDITION_TOL,
    upper_tol: float = PRECONDITION_TOL,
) -> CauseMassReport:
    """Verify the mass bounds and their proof diagnostics for one model.

    Preconditions (each enforced within precondition_tol): the partition
    screens the correlation off, and both marginals sit at one half. The
    half-marginal tolerance is an implementation choice; the bounds are
    derived for exactly even marginals.
    """
    _require_screened_even_model(model, precondition_tol)
    p_a = prob(model.space, model.event_a)
    p_b = prob(model.space, model.event_b)

    eps = model_epsilon(model)
    root = math.sqrt(eps)
    classes = classify_cells(model, border=border, precondition_tol=precondition_tol)
    stats = cell_stats(model)
    by_cell = {i: k for k, i in enumerate(stats.index)}

    high_mass = float(sum(stats.mass[by_cell[i]] for i in classes.high))
    lower_ok = high_mass - root <= p_a + 1e-12
    upper_ok = p_a <= high_mass + 4.0 * root - 2.0 * eps + upper_tol

    q, r, m = stats.cond_a, stats.cond_b, stats.mass
    gap_b = 0.5 * root if gap_border is None else float(gap_border)
    mid_k = [by_cell[i] for i in classes.mid]
    diagnostics = {
        "a_not_b_mass": float(np.sum(q * (1.0 - r) * m)),
        "b_not_a_mass": float(np.sum(r * (1.0 - q) * m)),
        "mid_gap_sum": float(sum(abs(q[k] - r[k]) * m[k] for k in mid_k)),
        "wide_mid_mass": float(
            sum(m[k] for k in mid_k if abs(q[k] - r[k]) >= gap_b)
        ),
        "gap_border": gap_b,
    }
    return CauseMassReport(
        epsilon=eps,
        border=classes.border,
        high_cells=classes.high,
        mid_cells=classes.mid,
        low_cells=classes.low,
        high_mass=high_mass,
        p_a=p_a,
        p_b=p_b,
        lower_ok=lower_ok,
        upper_ok=upper_ok,
        diagnostics=diagnostics,
    )


_OUTCOME_SUFFIX = ("11", "10", "01", "00")  # (in A, in B) indicator pairs
_GEN_S_MAX = 0.49


def random_screened_model(
    seed: int | np.random.Generator,
    n_cells: int,
    epsilon_target: float,
) -> PairwiseCcModel:
    """Random exactly-screened model with even marginals and a target deficit.

    Cells come in mirrored pairs of equal mass whose conditionals are
    complements of each other, which pins both marginals at exactly one
    half; with an odd cell count one self-mirrored cell at conditional 1/2
    takes a small slice of mass. Within-cell joints are products, so
    screening is exact by construction. The deficit is then matched by a
    one-dimensional root solve on the shared deviation scale. Deterministic
    for a given seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n_cells < 2:
        raise GenerationFailed(
            "a single screened cell forces independence, which is incompatible "
            "with a deficit below one half"
        )
    if not (0.0 <= epsilon_target < 0.5):
        raise GenerationFailed(f"epsilon_target must be in [0, 0.5), got {epsilon_target}")

    n_pairs = n_cells // 2
    has_mid = n_cells % 2 == 1
    mid_mass = min(epsilon_target, 0.05) if has_mid and epsilon_target > 1e-12 else 0.0

    raw = rng.uniform(0.5, 1.5, n_pairs)
    pair_mass = raw / raw.sum() * (1.0 - mid_mass)
    cell_mass = pair_mass / 2.0
    x = rng.uniform(0.6, 1.0, n_pairs)
    y = rng.uniform(0.6, 1.0, n_pairs)
    m1 = float(np.sum(cell_mass * (x + y)))
    m2 = float(np.sum(cell_mass * x * y))

    def deficit(s: float) -> float:
        return 0.5 * mid_mass + 2.0 * s * m1 - 4.0 * s * s * m2

    if epsilon_target <= 0.5 * mid_mass + 1e-15:
        scale = 0.0
    else:
        if deficit(_GEN_S_MAX) < epsilon_target:
            raise GenerationFailed(
                f"target deficit {epsilon_target} is out of reach for these draws"
            )
        try:
            scale = float(
                brentq(lambda s: deficit(s) - epsilon_target, 0.0, _GEN_S_MAX, xtol=1e-15)
            )
        except RuntimeError as exc:
            raise GenerationFailed(f"deficit solve did not converge: {exc}") from exc

    atoms: list[str] = []
    weights: list[float] = []
    cells: list[frozenset] = []

    def add_cell(i: int, mass: float, q: float, r: float) -> None:
        labels = [f"c{i}:{suf}" for suf in _OUTCOME_SUFFIX]
        atoms.extend(labels)
        weights.extend(
            [mass * q * r, mass * q * (1.0 - r), mass * (1.0 - q) * r, mass * (1.0 - q) * (1.0 - r)]
        )
        cells.append(frozenset(labels))

    cell_no = 0
    for k in range(n_pairs):
        q = 1.0 - scale * x[k]
        r = 1.0 - scale * y[k]
        add_cell(cell_no, float(cell_mass[k]), q, r)
        add_cell(cell_no + 1, float(cell_mass[k]), 1.0 - q, 1.0 - r)
        cell_no += 2
    if has_mid:
        add_cell(cell_no, mid_mass, 0.5, 0.5)

    space = FiniteProbSpace(tuple(atoms), np.asarray(weights))
    event_a = frozenset(a for a in atoms if a.endswith("11") or a.endswith("10"))
    event_b = frozenset(a for a in atoms if a.endswith("11") or a.endswith("01"))
    model = PairwiseCcModel(space, event_a, event_b, tuple(cells))

    p_a = prob(space, event_a)
    p_b = prob(space, event_b)
    if abs(p_a - 0.5) > 1e-9 or abs(p_b - 0.5) > 1e-9:
        raise GenerationFailed(f"marginals drifted: p(A)={p_a!r}, p(B)={p_b!r}")
    achieved = model_epsilon(model)
    if abs(achieved - epsilon_target) > 1e-6:
        raise GenerationFailed(
            f"deficit {achieved!r} missed the target {epsilon_target!r} beyond 1e-6"
        )
    return model


def pairwise_model_to_dict(model: PairwiseCcModel) -> dict:
    return {
        "type": "pairwise",
        "space": space_to_dict(model.space),
        "A": sorted(model.event_a),
        "B": sorted(model.event_b),
        "partition": [sorted(c) for c in model.cells],
    }


def pairwise_model_from_dict(data: dict) -> PairwiseCcModel:
    space = space_from_dict(data["space"])
    return PairwiseCcModel(
        space,
        frozenset(data["A"]),
        frozenset(data["B"]),
        tuple(frozenset(c) for c in data["partition"]),
    )


# ---------------------------------------------------------------------------
# 16-atom CH oracle
# ---------------------------------------------------------------------------


# Atom index bits are (A, A', B, B'), most significant first; bit 1 means the
# event occurs. These eight atoms are exactly the ones the CH combination
# counts with weight -1.
_NEGATIVE_ATOMS = (1, 3, 6, 7, 8, 9, 12, 14)


@dataclass(frozen=True)
class OracleResult:
    value: float
    identity_value: float
    in_bounds: bool


def ch_atom_oracle(atom_probs: Sequence[float], *, atol: float = 1e-9) -> OracleResult:
    """Evaluate the CH combination on an explicit 16-atom distribution.

    Computes the six marginals from the atoms, evaluates the combination,
    and independently recomputes it as minus the mass of the eight
    negatively-counted atoms. Because those eight atoms are distinct, the
    combination of any normalized distribution lies in [-1, 0]; in_bounds
    reports that check at 1e-12.
    """
    p = [float(v) for v in atom_probs]
    if len(p) != 16:
        raise UnnormalizedInput(f"need 16 atom probabilities, got {len(p)}")
    if min(p) < -1e-12:
        raise UnnormalizedInput(f"negative atom probability {min(p)}")
    total = math.fsum(p)
    if abs(total - 1.0) > atol:
        raise UnnormalizedInput(f"atom probabilities sum to {total!r}, not 1")

    pAB = p[10] + p[11] + p[14] + p[15]
    pABp = p[9] + p[11] + p[13] + p[15]
    pApBp = p[5] + p[7] + p[13] + p[15]
    pApB = p[6] + p[7] + p[14] + p[15]
    pA = p[8] + p[9] + p[10] + p[11] + p[12] + p[13] + p[14] + p[15]
    pBp = p[1] + p[3] + p[5] + p[7] + p[9] + p[11] + p[13] + p[15]
    value = pAB + pABp + pApBp - pApB - pA - pBp
    identity = -sum(p[i] for i in _NEGATIVE_ATOMS)
    in_bounds = -1.0 - 1e-12 <= value <= 1e-12
    return OracleResult(value=value, identity_value=identity, in_bounds=in_bounds)


# ---------------------------------------------------------------------------
# Full joint models over settings, outcomes, and per-direction causes
# ---------------------------------------------------------------------------

# Weight tensor axes: (a-setting, b-setting, A-outcome, B-outcome, c1..c4).
# Settings index Alice directions 1, 2 and Bob directions 3, 4; outcome
# index 0 is "+". Cause variable k belongs to direction k+1.
_ALICE_LABELS = ("1", "2")
_BOB_LABELS = ("3", "4")


def _marginal(w: np.ndarray, keep: tuple[int, ...]) -> np.ndarray:
    axes = tuple(k for k in range(w.ndim) if k not in keep)
    return w.sum(axis=axes)


@dataclass(frozen=True, eq=False)
class EprbModel:
    """Joint distribution over settings, outcomes, and four cause variables."""

    weights: np.ndarray
    cause_cards: tuple[int, int, int, int]

    def __post_init__(self):
        cards = tuple(int(c) for c in self.cause_cards)
        if len(cards) != 4 or any(c < 1 for c in cards):
            raise BadModel(f"need four cause cardinalities >= 1, got {cards}")
        w = np.asarray(self.weights, dtype=float)
        expected = (2, 2, 2, 2, *cards)
        if w.shape != expected:
            raise BadModel(f"weight tensor shape {w.shape} does not match {expected}")
        if np.any(w < 0.0):
            raise BadModel(f"negative weight {float(w.min())}")
        total = float(w.sum())
        if total <= 0.0:
            raise BadModel("total mass must be positive")
        w = w / total
        pair = w.sum(axis=tuple(range(2, w.ndim)))
        if np.any(pair <= 0.0):
            raise BadModel("every setting pair needs positive probability")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cause_cards", cards)

    # -- structural helpers -------------------------------------------------

    def setting_probs(self) -> np.ndarray:
        return _marginal(self.weights, (0, 1))

    def setting_pair_probs(self, a: int, b: int) -> SettingProbs:
        sp = self.setting_probs()
        return SettingProbs(float(sp[a].sum()), float(sp[:, b].sum()), float(sp[a, b]))

    def outcome_tables(self) -> np.ndarray:
        joint = _marginal(self.weights, (0, 1, 2, 3))
        pair = joint.sum(axis=(2, 3), keepdims=True)
        return joint / pair

    def profile(self) -> singlet.EpsilonProfile:
        t = self.outcome_tables()
        denom_b_minus = t[:, :, 0, 1] + t[:, :, 1, 1]
        denom_a_minus = t[:, :, 1, 0] + t[:, :, 1, 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            cond_ab = np.where(denom_b_minus > 0.0, t[:, :, 0, 1] / denom_b_minus, 0.0)
            cond_ba = np.where(denom_a_minus > 0.0, t[:, :, 1, 0] / denom_a_minus, 0.0)
        return singlet.epsilon_profile(cond_ab=cond_ab, cond_ba=cond_ba)

    def alice_plus(self, a: int) -> float:
        w = self.weights
        num = float(_marginal(w, (0, 2))[a, 0])
        den = float(_marginal(w, (0,))[a])
        return num / den

    def bob_plus(self, b: int) -> float:
        w = self.weights
        num = float(_marginal(w, (1, 3))[b, 0])
        den = float(_marginal(w, (1,))[b])
        return num / den

    def ch_value(self) -> float:
        t = self.outcome_tables()
        return float(
            t[0, 0, 0, 0] + t[0, 1, 0, 0] + t[1, 1, 0, 0] - t[1, 0, 0, 0]
            - self.alice_plus(0) - self.bob_plus(1)
        )

    def ch_terms(self) -> dict[str, float]:
        t = self.outcome_tables()
        return {
            "p13": float(t[0, 0, 0, 0]),
            "p14": float(t[0, 1, 0, 0]),
            "p24": float(t[1, 1, 0, 0]),
            "p23": float(t[1, 0, 0, 0]),
            "p1_plus": self.alice_plus(0),
            "p4_plus": self.bob_plus(1),
        }

    def weak_report(self, *, eps_override: float | None = None) -> WeakChReport:
        prof = self.profile()
        eps = prof.eps_global if eps_override is None else float(eps_override)
        cts = {
            pair: correction_terms(eps, self.setting_pair_probs(*pair))
            for pair in ((0, 0), (0, 1), (1, 1), (1, 0))
        }
        bounds = weak_ch_bounds(cts[(0, 0)], cts[(0, 1)], cts[(1, 1)], cts[(1, 0)])
        terms = self.ch_terms()
        value = terms["p13"] + terms["p14"] + terms["p24"] - terms["p23"] - terms["p1_plus"] - terms["p4_plus"]
        return evaluate_weak_ch(value, bounds, eps, terms=terms)

    def to_dict(self) -> dict:
        return {
            "type": "eprb",
            "cause_cards": list(self.cause_cards),
            "weights": [float(v) for v in self.weights.ravel()],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EprbModel":
        cards = tuple(int(c) for c in data["cause_cards"])
        flat = np.asarray(data["weights"], dtype=float)
        n = 16 * int(np.prod(cards))
        if flat.size != n:
            raise BadModel(f"expected {n} weights for cards {cards}, got {flat.size}")
        return cls(flat.reshape((2, 2, 2, 2, *cards)), cards)


def validate_loc(model: EprbModel) -> ResidualReport:
    """Locality residuals: far setting vs pooled conditionals of near outcomes.

    For each wing, own setting, own-direction cause cell, far setting, and
    outcome, reports p(out | own, far, cell) - p(out | own, cell). Cells or
    setting pairs of zero conditioning mass are skipped and listed.
    """
    w = model.weights
    labels: list[str] = []
    residuals: list[float] = []
    skipped: list[str] = []

    for ai in (0, 1):
        arr = w[ai]  # (b, A, B, c1..c4)
        ca = 3 + ai
        s = _marginal(arr, (0, 1, ca))  # (b, A, cell)
        denom_ab = s.sum(axis=1)
        pooled = s.sum(axis=0)
        denom_a = pooled.sum(axis=0)
        for i in range(model.cause_cards[ai]):
            cell = f"c{ai + 1}={i}"
            if denom_a[i] <= 0.0:
                skipped.append(f"alice a{_ALICE_LABELS[ai]} {cell}")
                continue
            base = pooled[:, i] / denom_a[i]
            for bj in (0, 1):
                if denom_ab[bj, i] <= 0.0:
                    skipped.append(f"alice a{_ALICE_LABELS[ai]} b{_BOB_LABELS[bj]} {cell}")
                    continue
                for o, sign in enumerate("+-"):
                    labels.append(
                        f"alice A={sign} a{_ALICE_LABELS[ai]} b{_BOB_LABELS[bj]} {cell}"
                    )
                    residuals.append(float(s[bj, o, i] / denom_ab[bj, i] - base[o]))

    for bj in (0, 1):
        arr = w[:, bj]  # (a, A, B, c1..c4)
        cb = 5 + bj
        s = _marginal(arr, (0, 2, cb))  # (a, B, cell)
        denom_ab = s.sum(axis=1)
        pooled = s.sum(axis=0)
        denom_b = pooled.sum(axis=0)
        for j in range(model.cause_cards[2 + bj]):
            cell = f"c{bj + 3}={j}"
            if denom_b[j] <= 0.0:
                skipped.append(f"bob b{_BOB_LABELS[bj]} {cell}")
                continue
            base = pooled[:, j] / denom_b[j]
            for ai in (0, 1):
                if denom_ab[ai, j] <= 0.0:
                    skipped.append(f"bob b{_BOB_LABELS[bj]} a{_ALICE_LABELS[ai]} {cell}")
                    continue
                for o, sign in enumerate("+-"):
                    labels.append(
                        f"bob B={sign} b{_BOB_LABELS[bj]} a{_ALICE_LABELS[ai]} {cell}"
                    )
                    residuals.append(float(s[ai, o, j] / denom_ab[ai, j] - base[o]))

    return ResidualReport(tuple(labels), tuple(residuals), tuple(skipped))


def validate_no_conspiracy(model: EprbModel) -> ResidualReport:
    """Setting-independence residuals of the five product conditions.

    Settings must be independent of each single cause cell and of pairs of
    cause cells from opposite wings; the validator checks exactly the five
    listed product forms, nothing finer.
    """
    w = model.weights
    sp = model.setting_probs()
    p_a = sp.sum(axis=1)
    p_b = sp.sum(axis=0)
    labels: list[str] = []
    residuals: list[float] = []

    cause_marg = [
        _marginal(w, (4,)),
        _marginal(w, (5,)),
        _marginal(w, (6,)),
        _marginal(w, (7,)),
    ]

    for ai in (0, 1):
        pac = _marginal(w[ai], (3 + ai,))
        for i in range(model.cause_cards[ai]):
            labels.append(f"p(a{_ALICE_LABELS[ai]}, c{ai + 1}={i})")
            residuals.append(float(pac[i] - p_a[ai] * cause_marg[ai][i]))
    for bj in (0, 1):
        pbc = _marginal(w[:, bj], (5 + bj,))
        for j in range(model.cause_cards[2 + bj]):
            labels.append(f"p(b{_BOB_LABELS[bj]}, c{bj + 3}={j})")
            residuals.append(float(pbc[j] - p_b[bj] * cause_marg[2 + bj][j]))

    for ai in (0, 1):
        for bj in (0, 1):
            block = w[ai, bj]  # (A, B, c1..c4)
            pab = float(sp[ai, bj])
            pabc_a = _marginal(block, (2 + ai,))
            for i in range(model.cause_cards[ai]):
                labels.append(f"p(a{_ALICE_LABELS[ai]}b{_BOB_LABELS[bj]}, c{ai + 1}={i})")
                residuals.append(float(pabc_a[i] - pab * cause_marg[ai][i]))
            pabc_b = _marginal(block, (4 + bj,))
            for j in range(model.cause_cards[2 + bj]):
                labels.append(f"p(a{_ALICE_LABELS[ai]}b{_BOB_LABELS[bj]}, c{bj + 3}={j})")
                residuals.append(float(pabc_b[j] - pab * cause_marg[2 + bj][j]))
            pab_cc = _marginal(block, (2 + ai, 4 + bj))
            pcc = _marginal(w, (4 + ai, 6 + bj))
            diff = pab_cc - pab * pcc
            for i in range(model.cause_cards[ai]):
                for j in range(model.cause_cards[2 + bj]):
                    labels.append(
                        f"p(a{_ALICE_LABELS[ai]}b{_BOB_LABELS[bj]}, c{ai + 1}={i}, c{bj + 3}={j})"
                    )
                    residuals.append(float(diff[i, j]))

    return ResidualReport(tuple(labels), tuple(residuals), tuple())


def validate_screening(
    model: EprbModel, profile: singlet.EpsilonProfile | None = None
) -> ResidualReport:
    """Screening residuals of the partner-direction cause partitions.

    For Alice direction a with partner direction b, the cause cells of a
    must factorize the events (+ on Alice, - on Bob) inside the setting
    pair (a, b); mirrored for Bob. Partners come from the model's own
    conditional tables, not from any quantum formula.
    """
    prof = model.profile() if profile is None else profile
    w = model.weights
    labels: list[str] = []
    residuals: list[float] = []
    skipped: list[str] = []

    def one_side(block: np.ndarray, cause_axis: int, plus_first: bool, tag: str, card: int) -> None:
        s = _marginal(block, (0, 1, cause_axis))  # (A, B, cell)
        mass = s.sum(axis=(0, 1))
        for i in range(card):
            if mass[i] <= 0.0:
                skipped.append(f"{tag} cell={i}")
                continue
            if plus_first:  # events: A = "+", B = "-"
                pj = s[0, 1, i] / mass[i]
                pa = (s[0, 0, i] + s[0, 1, i]) / mass[i]
                pb = (s[0, 1, i] + s[1, 1, i]) / mass[i]
            else:  # events: A = "-", B = "+"
                pj = s[1, 0, i] / mass[i]
                pa = (s[1, 0, i] + s[1, 1, i]) / mass[i]
                pb = (s[0, 0, i] + s[1, 0, i]) / mass[i]
            labels.append(f"{tag} cell={i}")
            residuals.append(float(pj - pa * pb))

    for ai in (0, 1):
        bj = int(prof.partner_a[ai])
        one_side(
            w[ai, bj],
            2 + ai,
            True,
            f"screen a{_ALICE_LABELS[ai]} partner b{_BOB_LABELS[bj]} c{ai + 1}",
            model.cause_cards[ai],
        )
    for bj in (0, 1):
        ai = int(prof.partner_b[bj])
        one_side(
            w[ai, bj],
            4 + bj,
            False,
            f"screen b{_BOB_LABELS[bj]} partner a{_ALICE_LABELS[ai]} c{bj + 3}",
            model.cause_cards[2 + bj],
        )

    return ResidualReport(tuple(labels), tuple(residuals), tuple(skipped))


@dataclass(frozen=True)
class AggregateCause:
    """Union of cause cells that make one outcome nearly certain."""

    side: str
    direction: int
    cells: tuple[int, ...]
    cutoff: float
    epsilon_dir: float


def _aggregate(model: EprbModel, side: str, direction: int, prof: singlet.EpsilonProfile) -> AggregateCause:
    w = model.weights
    if side == "alice":
        eps_dir = float(prof.eps_a[direction])
        s = _marginal(w[direction], (1, 3 + direction))  # (A, cell)
        card = model.cause_cards[direction]
    elif side == "bob":
        eps_dir = float(prof.eps_b[direction])
        s = _marginal(w[:, direction], (2, 5 + direction))  # (B, cell)
        card = model.cause_cards[2 + direction]
    else:
        raise ValueError(f"side must be 'alice' or 'bob', got {side!r}")
    cutoff = 1.0 - math.sqrt(eps_dir)
    denom = s.sum(axis=0)
    cells = [
        i
        for i in range(card)
        if denom[i] > 0.0 and s[0, i] / denom[i] >= cutoff - 1e-12
    ]
    return AggregateCause(side, direction, tuple(cells), cutoff, eps_dir)


def build_aggregate_cause(
    model: EprbModel,
    side: str,
    direction: int,
    *,
    profile: singlet.EpsilonProfile | None = None,
    loc_tol: float = PRECONDITION_TOL,
) -> AggregateCause:
    """Cells whose pooled conditional for "+" reaches 1 - sqrt(eps_dir).

    Pooling over the far setting is justified only when the locality
    residuals vanish, so that is a precondition. Inclusion is inclusive at
    the cutoff, with a 1e-12 floating-point guard.
    """
    loc = validate_loc(model)
    if loc.max_abs > loc_tol:
        raise PreconditionViolated(f"locality residual {loc.max_abs:.3e} exceeds {loc_tol:.1e}")
    prof = model.profile() if profile is None else profile
    return _aggregate(model, side, direction, prof)


@dataclass(frozen=True)
class JointCausePair:
    pair: str
    p_plus_plus: float
    p_joint_cause: float
    d_minus: float
    d_plus: float
    lower_ok: bool
    upper_ok: bool


@dataclass(frozen=True)
class JointCauseReport:
    epsilon: float
    pairs: tuple[JointCausePair, ...]
    alice_cells: tuple[tuple[int, ...], tuple[int, ...]]
    bob_cells: tuple[tuple[int, ...], tuple[int, ...]]

    @property
    def ok(self) -> bool:
        return all(p.lower_ok and p.upper_ok for p in self.pairs)


def joint_cause_bounds_check(
    model: EprbModel,
    *,
    eps_override: float | None = None,
    tol: float = PRECONDITION_TOL,
) -> JointCauseReport:
    """Check the correction-term interval around p(+,+|ab) for each pair.

    For every setting pair, the probability that both aggregate causes
    occur must satisfy

        p(+,+|ab) - d_plus_ab <= p(C^a C^b) <= p(+,+|ab) + d_minus_ab

    with the correction terms computed at the model's own global deficit
    (or at eps_override). The strict side carries the tolerance.
    """
    loc = validate_loc(model)
    if loc.max_abs > tol:
        raise PreconditionViolated(f"locality residual {loc.max_abs:.3e} exceeds {tol:.1e}")
    nc = validate_no_conspiracy(model)
    if nc.max_abs > tol:
        raise PreconditionViolated(
            f"setting-independence residual {nc.max_abs:.3e} exceeds {tol:.1e}"
        )
    prof = model.profile()
    scr = validate_screening(model, prof)
    if scr.max_abs > tol:
        raise PreconditionViolated(f"screening residual {scr.max_abs:.3e} exceeds {tol:.1e}")

    eps = prof.eps_global if eps_override is None else float(eps_override)
    agg_a = [_aggregate(model, "alice", d, prof) for d in (0, 1)]
    agg_b = [_aggregate(model, "bob", d, prof) for d in (0, 1)]
    t = model.outcome_tables()
    pairs = []
    for ai in (0, 1):
        for bj in (0, 1):
            ct = correction_terms(eps, model.setting_pair_probs(ai, bj))
            cc = _marginal(model.weights, (4 + ai, 6 + bj))
            sel_a = list(agg_a[ai].cells)
            sel_b = list(agg_b[bj].cells)
            p_cc = float(cc[np.ix_(sel_a, sel_b)].sum()) if sel_a and sel_b else 0.0
            p_pp = float(t[ai, bj, 0, 0])
            pairs.append(
                JointCausePair(
                    pair=f"{_ALICE_LABELS[ai]}{_BOB_LABELS[bj]}",
                    p_plus_plus=p_pp,
                    p_joint_cause=p_cc,
                    d_minus=ct.d_minus_ab,
                    d_plus=ct.d_plus_ab,
                    lower_ok=p_pp - ct.d_plus_ab <= p_cc + tol,
                    upper_ok=p_cc <= p_pp + ct.d_minus_ab + 1e-12,
                )
            )
    return JointCauseReport(
        epsilon=eps,
        pairs=tuple(pairs),
        alice_cells=(agg_a[0].cells, agg_a[1].cells),
        bob_cells=(agg_b[0].cells, agg_b[1].cells),
    )


def random_eprb_model(
    seed: int | np.random.Generator,
    cause_cards: Sequence[int] = (2, 2, 2, 2),
    epsilon_target: float = 1e-3,
    setting_probs: np.ndarray | None = None,
) -> EprbModel:
    """Random model satisfying every assumption exactly, with a small deficit.

    Construction: settings are drawn independently of everything else; a
    hidden binary pattern picks, for each cause variable, a group of cell
    values (so cause variables are correlated only through the pattern);
    each outcome depends only on its own setting and its own-direction
    cause cell. That product structure makes locality, setting
    independence, and screening hold identically, for any kernels. Outcome
    kernels are near-deterministic with randomized per-cell deviations
    balanced so both wings stay exactly even, and the deviation scale is
    chosen so the global deficit lands at or below epsilon_target.
    Deterministic for a given seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cards = tuple(int(c) for c in cause_cards)
    if len(cards) != 4 or any(c < 2 for c in cards):
        raise BadModel(f"need four cause cardinalities >= 2, got {cards}")
    if not (0.0 <= epsilon_target <= 0.1):
        raise GenerationFailed(
            f"epsilon_target must be in [0, 0.1] for this generator, got {epsilon_target}"
        )
    if setting_probs is None:
        sp = np.full((2, 2), 0.25)
    else:
        sp = np.asarray(setting_probs, dtype=float)
        if sp.shape != (2, 2) or np.any(sp <= 0.0):
            raise BadModel("setting_probs must be a strictly positive 2x2 table")
        sp = sp / sp.sum()

    splits = []
    for card in cards:
        g0_size = int(rng.integers(1, card))
        perm = rng.permutation(card)
        idx0 = np.sort(perm[:g0_size])
        idx1 = np.sort(perm[g0_size:])
        w0 = rng.dirichlet(np.full(idx0.size, 2.0))
        w1 = rng.dirichlet(np.full(idx1.size, 2.0))
        splits.append((idx0, w0, idx1, w1))

    delta = 0.45 * epsilon_target
    for _ in range(6):
        plus = []
        for x in range(4):
            idx0, w0, idx1, w1 = splits[x]
            vec = np.zeros(cards[x])
            if x < 2:
                des_idx, des_w, oth_idx, oth_w = idx0, w0, idx1, w1
            else:
                des_idx, des_w, oth_idx, oth_w = idx1, w1, idx0, w0
            if delta == 0.0:
                vec[des_idx] = 1.0
            else:
                d_raw = rng.uniform(0.5, 1.0, des_idx.size) * delta
                e_raw = rng.uniform(0.5, 1.0, oth_idx.size) * delta
                md = float(np.dot(des_w, d_raw))
                me = float(np.dot(oth_w, e_raw))
                e_raw = e_raw * (md / me)
                vec[des_idx] = 1.0 - d_raw
                vec[oth_idx] = e_raw
            plus.append(vec)

        group_vecs = []
        for z in (0, 1):
            per_var = []
            for x in range(4):
                idx0, w0, idx1, w1 = splits[x]
                full = np.zeros(cards[x])
                if z == 0:
                    full[idx0] = w0
                else:
                    full[idx1] = w1
                per_var.append(full)
            group_vecs.append(per_var)

        w = np.zeros((2, 2, 2, 2, *cards))
        for z in (0, 1):
            c1, c2, c3, c4 = group_vecs[z]
            for a in (0, 1):
                ka = np.stack([plus[a], 1.0 - plus[a]])
                for b in (0, 1):
                    kb = np.stack([plus[2 + b], 1.0 - plus[2 + b]])
                    if a == 0 and b == 0:
                        block = np.einsum("ai,j,bk,l->abijkl", ka * c1, c2, kb * c3, c4)
                    elif a == 0 and b == 1:
                        block = np.einsum("ai,j,k,bl->abijkl", ka * c1, c2, c3, kb * c4)
                    elif a == 1 and b == 0:
                        block = np.einsum("i,aj,bk,l->abijkl", c1, ka * c2, kb * c3, c4)
                    else:
                        block = np.einsum("i,aj,k,bl->abijkl", c1, ka * c2, c3, kb * c4)
                    w[a, b] += 0.5 * sp[a, b] * block

        model = EprbModel(w, cards)
        achieved = model.profile().eps_global
        if achieved <= epsilon_target * (1.0 + 1e-9) + 1e-15:
            return model
        delta *= 0.5
    raise GenerationFailed(
        f"could not reach deficit <= {epsilon_target} after shrinking the deviation scale"
    )


def model_from_dict(data: dict):
    kind = data.get("type")
    if kind == "eprb":
        return EprbModel.from_dict(data)
    if kind == "pairwise":
        return pairwise_model_from_dict(data)
    raise BadModel(f"unknown model type {kind!r}")
