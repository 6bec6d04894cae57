"""The CH inequality, its correction-term weakening, and related checks.

For arbitrary events A, A', B, B' of one probability space the CH
combination

    p(AB) + p(AB') + p(A'B') - p(A'B) - p(A) - p(B')

lies in [-1, 0]. When the four pairwise correlations are only nearly
perfect, with deficit eps, the interval widens by correction terms built
from sqrt(eps):

    d_minus_ab = (p(a) + p(b)) * sqrt(eps) / p(ab)
    d_plus_ab  = (p(a) + p(b)) * (5*sqrt(eps) - 2*eps) / p(ab)
    d_minus    = sqrt(eps)
    d_plus     = 4*sqrt(eps) - 2*eps

The weakened bounds are

    lower = -1 - d_minus_13 - d_minus_14 - d_minus_24 - d_plus_23 - 2*d_plus
    upper =      d_plus_13  + d_plus_14  + d_plus_24  + d_minus_23 + 2*d_minus

which reduce to the strict CH interval [-1, 0] at eps = 0. This module
also solves for the largest eps at which the extremal quantum value still
violates each bound, checks the quantum (Tsirelson) interval
[-(sqrt(2)+1)/2, (sqrt(2)-1)/2], and computes no-signalling residuals of
per-setting-pair outcome tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spaces import WeakChError

TSIRELSON_LOWER = -(math.sqrt(2.0) + 1.0) / 2.0
TSIRELSON_UPPER = (math.sqrt(2.0) - 1.0) / 2.0

# How far the extremal quantum value sits outside the strict CH interval,
# the same amount (sqrt(2)-1)/2 on both sides.
QUANTUM_EXCESS = TSIRELSON_UPPER

# Strict inequalities are tested non-strictly at this tolerance; strictness
# is not detectable in floating point and the eps = 0 reduction must pass
# exactly.
VIOLATION_ATOL = 1e-12


class BadEpsilon(WeakChError):
    """Deficit outside [0, 1]."""


class BadSettingProbs(WeakChError):
    """Setting probabilities violate their constraints."""


class MixedEpsilon(WeakChError):
    """Correction terms built from different deficits were combined."""


class UnnormalizedTable(WeakChError):
    """A per-setting-pair outcome table does not sum to one."""


@dataclass(frozen=True)
class SettingProbs:
    """Probabilities of one Alice setting, one Bob setting, and their joint."""

    p_a: float
    p_b: float
    p_ab: float

    def __post_init__(self):
        for name, v in (("p_a", self.p_a), ("p_b", self.p_b), ("p_ab", self.p_ab)):
            if not (0.0 < v <= 1.0):
                raise BadSettingProbs(f"{name} must be in (0, 1], got {v}")
        if self.p_ab > min(self.p_a, self.p_b) + 1e-12:
            raise BadSettingProbs(
                f"p_ab={self.p_ab} exceeds min(p_a, p_b)={min(self.p_a, self.p_b)}"
            )


# The even, independent choice: p(a) = p(b) = 1/2 and p(ab) = 1/4.
SYMMETRIC_SETTINGS = SettingProbs(0.5, 0.5, 0.25)


@dataclass(frozen=True)
class CorrectionTerms:
    """Correction terms for one setting pair at a given deficit.

    Carries the deficit it was built from so that mixed combinations can be
    rejected. All four terms vanish at eps = 0 and d_plus dominates d_minus
    for eps in (0, 1].
    """

    epsilon: float
    d_minus_ab: float
    d_plus_ab: float
    d_minus: float
    d_plus: float


def correction_terms(epsilon: float, sp: SettingProbs = SYMMETRIC_SETTINGS) -> CorrectionTerms:
    """Correction terms at deficit epsilon for the given setting probabilities."""
    eps = float(epsilon)
    if not (0.0 <= eps <= 1.0) or math.isnan(eps):
        raise BadEpsilon(f"epsilon must be in [0, 1], got {epsilon}")
    root = math.sqrt(eps)
    ratio = (sp.p_a + sp.p_b) / sp.p_ab
    return CorrectionTerms(
        epsilon=eps,
        d_minus_ab=ratio * root,
        d_plus_ab=ratio * (5.0 * root - 2.0 * eps),
        d_minus=root,
        d_plus=4.0 * root - 2.0 * eps,
    )


def ch_expression(pAB: float, pABp: float, pApBp: float, pApB: float, pA: float, pBp: float) -> float:
    """The six-term CH combination; in [-1, 0] for events of one space."""
    return pAB + pABp + pApBp - pApB - pA - pBp


def weak_ch_bounds(
    ct13: CorrectionTerms,
    ct14: CorrectionTerms,
    ct24: CorrectionTerms,
    ct23: CorrectionTerms,
) -> tuple[float, float]:
    """Corrected interval for the CH combination over direction pairs 13, 14, 24, 23.

    All four correction terms must come from the same deficit. At eps = 0
    this returns exactly (-1.0, 0.0).
    """
    cts = (ct13, ct14, ct24, ct23)
    eps = ct13.epsilon
    if any(ct.epsilon != eps for ct in cts):
        raise MixedEpsilon(
            "correction terms were built from different deficits: "
            + ", ".join(repr(ct.epsilon) for ct in cts)
        )
    lower = -1.0 - ct13.d_minus_ab - ct14.d_minus_ab - ct24.d_minus_ab - ct23.d_plus_ab - 2.0 * ct13.d_plus
    upper = ct13.d_plus_ab + ct14.d_plus_ab + ct24.d_plus_ab + ct23.d_minus_ab + 2.0 * ct13.d_minus
    return lower, upper


@dataclass(frozen=True)
class WeakChReport:
    """Outcome of checking one CH combination value against corrected bounds."""

    value: float
    lower: float
    upper: float
    epsilon: float
    violated_lower: bool
    violated_upper: bool
    terms: dict | None = None

    @property
    def violated(self) -> bool:
        return self.violated_lower or self.violated_upper

    def as_dict(self) -> dict:
        out = {
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "epsilon": self.epsilon,
            "violated_lower": self.violated_lower,
            "violated_upper": self.violated_upper,
        }
        if self.terms is not None:
            out["terms"] = dict(self.terms)
        return out


def evaluate_weak_ch(
    value: float,
    bounds: tuple[float, float],
    epsilon: float,
    terms: dict | None = None,
) -> WeakChReport:
    """Flag whether a combination value leaves the corrected interval.

    The report carries the input probabilities when available, for audit
    output.
    """
    lower, upper = float(bounds[0]), float(bounds[1])
    v = float(value)
    return WeakChReport(
        value=v,
        lower=lower,
        upper=upper,
        epsilon=float(epsilon),
        violated_lower=v < lower - VIOLATION_ATOL,
        violated_upper=v > upper + VIOLATION_ATOL,
        terms=terms,
    )


def bound_coefficients(sp: SettingProbs = SYMMETRIC_SETTINGS) -> tuple[tuple[float, float], tuple[float, float]]:
    """Coefficients (lin, quad) so each total correction is lin*x - quad*x^2, x = sqrt(eps).

    Assumes all four direction pairs share the same setting probabilities.
    For the even symmetric choice this gives (40, 12) for the lower side and
    (66, 24) for the upper side.
    """
    r = (sp.p_a + sp.p_b) / sp.p_ab
    lower = (8.0 * r + 8.0, 2.0 * r + 4.0)
    upper = (16.0 * r + 2.0, 6.0 * r)
    return lower, upper


def _smaller_root(lin: float, quad: float, rhs: float) -> float:
    # Solve lin*x - quad*x^2 = rhs for the smaller nonnegative root.
    disc = lin * lin - 4.0 * quad * rhs
    if disc < 0.0:
        raise ValueError("no crossing: requested excess exceeds the correction maximum")
    return (lin - math.sqrt(disc)) / (2.0 * quad)


def epsilon_thresholds(
    excess: float = QUANTUM_EXCESS,
    sp: SettingProbs = SYMMETRIC_SETTINGS,
) -> tuple[float, float]:
    """Largest deficits at which the extremal quantum values still violate.

    Solves lin*x - quad*x^2 = excess for x = sqrt(eps) in closed form
    (smaller quadratic root) for both bound sides and returns
    (eps_lower_max, eps_upper_max). With excess = 0 both thresholds are 0.
    """
    (lin_lo, quad_lo), (lin_up, quad_up) = bound_coefficients(sp)
    x_lo = _smaller_root(lin_lo, quad_lo, float(excess))
    x_up = _smaller_root(lin_up, quad_up, float(excess))
    return x_lo * x_lo, x_up * x_up


def no_signalling_residuals(tables: np.ndarray, *, atol: float = 1e-9) -> list[float]:
    """Marginal-consistency residuals of per-setting-pair outcome tables.

    tables[a, b] is the 2x2 joint outcome distribution given settings
    (a, b), each normalized to one. For each wing, outcome, own setting,
    and pair of far settings, returns the difference between the two far-
    setting marginals. All residuals vanish exactly when the far setting
    cannot influence the near marginal.
    """
    t = np.asarray(tables, dtype=float)
    if t.ndim != 4 or t.shape[2:] != (2, 2):
        raise UnnormalizedTable("tables must have shape (n_a, n_b, 2, 2)")
    sums = t.sum(axis=(2, 3))
    if np.any(np.abs(sums - 1.0) > atol):
        worst = float(np.abs(sums - 1.0).max())
        raise UnnormalizedTable(f"table sums deviate from 1 by up to {worst}")
    n_a, n_b = t.shape[:2]
    res: list[float] = []
    alice_marg = t.sum(axis=3)  # (a, b, A)
    bob_marg = t.sum(axis=2)    # (a, b, B)
    for a in range(n_a):
        for b1 in range(n_b):
            for b2 in range(b1 + 1, n_b):
                for o in range(2):
                    res.append(float(alice_marg[a, b1, o] - alice_marg[a, b2, o]))
    for b in range(n_b):
        for a1 in range(n_a):
            for a2 in range(a1 + 1, n_a):
                for o in range(2):
                    res.append(float(bob_marg[a1, b, o] - bob_marg[a2, b, o]))
    return res


def tsirelson_check(value: float, *, atol: float = 1e-12) -> bool:
    """True iff value lies in the quantum interval, within tolerance."""
    return TSIRELSON_LOWER - atol <= float(value) <= TSIRELSON_UPPER + atol
