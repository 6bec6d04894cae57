"""Singlet-state predictions for a two-wing spin measurement.

For two spin-1/2 particles in the singlet state measured along directions
separated by an angle phi, the joint outcome probabilities are

    p(+,+) = p(-,-) = sin^2(phi/2) / 2
    p(+,-) = p(-,+) = cos^2(phi/2) / 2

and each single-wing outcome is unbiased, p(+) = p(-) = 1/2, independent of
either direction. This module evaluates those predictions, builds the
anticorrelation-deficit profile of a direction configuration (how far the
best available correlations are from perfect), and computes the six-term
CH combination on four directions.

Angle convention: radians, canonicalized to [0, 2*pi). All formulas are
2*pi-periodic and even in the angle, so canonicalization preserves values
while keeping golden outputs byte-stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

TAU = 2.0 * math.pi

Sign = Literal["+", "-"]
OUTCOMES: tuple[Sign, Sign] = ("+", "-")


def canonical_angle(value: float) -> float:
    """Reduce an angle in radians to the canonical range [0, 2*pi)."""
    r = math.fmod(float(value), TAU)
    if r < 0.0:
        r += TAU
    return r


def _check_sign(outcome: str) -> str:
    if outcome not in OUTCOMES:
        raise ValueError(f"outcome must be '+' or '-', got {outcome!r}")
    return outcome


def joint_prob(phi: float, a_out: Sign, b_out: Sign) -> float:
    """Joint outcome probability at inter-direction angle phi.

    sin^2(phi/2)/2 for equal signs, cos^2(phi/2)/2 for opposite signs.
    """
    _check_sign(a_out)
    _check_sign(b_out)
    half = 0.5 * canonical_angle(phi)
    if a_out == b_out:
        return 0.5 * math.sin(half) ** 2
    return 0.5 * math.cos(half) ** 2


def marginal_prob(outcome: Sign) -> float:
    """Single-wing outcome probability; exactly 1/2 for either sign."""
    _check_sign(outcome)
    return 0.5


def outcome_table(phi: float) -> np.ndarray:
    """2x2 table of joint outcome probabilities, indexed [a_out, b_out] with 0='+'."""
    half = 0.5 * canonical_angle(phi)
    s = 0.5 * math.sin(half) ** 2
    c = 0.5 * math.cos(half) ** 2
    return np.array([[s, c], [c, s]])


def outcome_tables(alice: Sequence[float], bob: Sequence[float]) -> np.ndarray:
    """Per-setting-pair joint outcome tables, shape (n_alice, n_bob, 2, 2)."""
    out = np.empty((len(alice), len(bob), 2, 2))
    for i, a in enumerate(alice):
        for j, b in enumerate(bob):
            out[i, j] = outcome_table(a - b)
    return out


@dataclass(frozen=True, eq=False)
class DirectionConfig:
    """Measurement direction sets for the two wings, canonicalized radians."""

    alice: tuple[float, ...]
    bob: tuple[float, ...]

    def __post_init__(self):
        a = tuple(canonical_angle(x) for x in self.alice)
        b = tuple(canonical_angle(x) for x in self.bob)
        if not a or not b:
            raise ValueError("both direction lists must be non-empty")
        object.__setattr__(self, "alice", a)
        object.__setattr__(self, "bob", b)


@dataclass(frozen=True, eq=False)
class EpsilonProfile:
    """Anticorrelation deficits of a direction configuration.

    eps_ab[i, j] is the deficit 1 - p(+_a | -_b) for Alice direction i and
    Bob direction j; eps_ba[i, j] the mirrored deficit 1 - p(+_b | -_a).
    Each direction keeps its per-direction minimum together with the index
    of the partner direction achieving it (ties broken toward the lowest
    index, an arbitrary but reproducible choice). eps_global is the largest
    of all per-direction minima.
    """

    eps_ab: np.ndarray
    eps_ba: np.ndarray
    eps_a: np.ndarray
    partner_a: np.ndarray
    eps_b: np.ndarray
    partner_b: np.ndarray
    eps_global: float

    def as_dict(self) -> dict:
        return {
            "eps_ab": self.eps_ab.tolist(),
            "eps_ba": self.eps_ba.tolist(),
            "eps_a": self.eps_a.tolist(),
            "partner_a": self.partner_a.tolist(),
            "eps_b": self.eps_b.tolist(),
            "partner_b": self.partner_b.tolist(),
            "eps_global": float(self.eps_global),
        }


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def epsilon_profile(
    cfg: DirectionConfig | None = None,
    *,
    cond_ab: np.ndarray | None = None,
    cond_ba: np.ndarray | None = None,
) -> EpsilonProfile:
    """Deficit profile of a configuration, or of supplied conditional tables.

    With only a DirectionConfig the deficits come from the singlet formulas,
    eps = sin^2(phi/2). Alternatively pass the conditional-probability
    tables directly (cond_ab[i, j] = p(+_a | -_b), cond_ba[i, j] =
    p(+_b | -_a)) so that perturbed, non-quantum worlds can be profiled.
    """
    if cond_ab is None and cond_ba is None:
        if cfg is None:
            raise ValueError("need a DirectionConfig or conditional tables")
        na, nb = len(cfg.alice), len(cfg.bob)
        eps_ab = np.empty((na, nb))
        for i, a in enumerate(cfg.alice):
            for j, b in enumerate(cfg.bob):
                eps_ab[i, j] = math.sin(0.5 * canonical_angle(a - b)) ** 2
        eps_ba = eps_ab.copy()
    else:
        if cond_ab is None or cond_ba is None:
            raise ValueError("supply both conditional tables or neither")
        eps_ab = 1.0 - np.asarray(cond_ab, dtype=float)
        eps_ba = 1.0 - np.asarray(cond_ba, dtype=float)
        if eps_ab.shape != eps_ba.shape or eps_ab.ndim != 2:
            raise ValueError("conditional tables must be 2-d with equal shapes")
        for name, t in (("cond_ab", eps_ab), ("cond_ba", eps_ba)):
            if np.any(t < -1e-9) or np.any(t > 1.0 + 1e-9):
                raise ValueError(f"{name} has entries outside [0, 1]")
        eps_ab = np.clip(eps_ab, 0.0, 1.0)
        eps_ba = np.clip(eps_ba, 0.0, 1.0)

    eps_a = eps_ab.min(axis=1)
    partner_a = eps_ab.argmin(axis=1)
    eps_b = eps_ba.min(axis=0)
    partner_b = eps_ba.argmin(axis=0)
    eps_global = float(max(eps_a.max(), eps_b.max()))
    return EpsilonProfile(
        eps_ab=_freeze(eps_ab),
        eps_ba=_freeze(eps_ba),
        eps_a=_freeze(eps_a),
        partner_a=_freeze(partner_a),
        eps_b=_freeze(eps_b),
        partner_b=_freeze(partner_b),
        eps_global=eps_global,
    )


def ch_terms(theta: Sequence[float]) -> dict[str, float]:
    """The six singlet probabilities entering the CH combination.

    theta holds the four absolute directions (1, 2 for Alice; 3, 4 for Bob);
    each joint term uses the inter-direction angle theta_i - theta_j.
    """
    t = [float(x) for x in theta]
    if len(t) != 4:
        raise ValueError("theta must hold exactly four angles")
    t1, t2, t3, t4 = t
    return {
        "p13": joint_prob(t1 - t3, "+", "+"),
        "p14": joint_prob(t1 - t4, "+", "+"),
        "p24": joint_prob(t2 - t4, "+", "+"),
        "p23": joint_prob(t2 - t3, "+", "+"),
        "p1_plus": marginal_prob("+"),
        "p4_plus": marginal_prob("+"),
    }


def ch_value(theta: Sequence[float]) -> float:
    """CH combination p13 + p14 + p24 - p23 - p(+|1) - p(+|4) for the singlet."""
    t = ch_terms(theta)
    return t["p13"] + t["p14"] + t["p24"] - t["p23"] - t["p1_plus"] - t["p4_plus"]
