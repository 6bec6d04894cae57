"""Monte Carlo generation of measurement records and finite-sample testing.

Runs are drawn per setting pair and outcome pair, either from the singlet
formulas at four given directions or from the conditional tables of a
saved model. Estimates are conditional relative frequencies with Wald
standard errors, and the inequality test declares a violation only when a
bound is exceeded by more than k standard errors.

Sampling is sharded into fixed-size chunks, each with its own stream keyed
by (seed, chunk index); merged counts are order-independent, so parallel
and serial execution agree exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import singlet
from .common_cause import EprbModel, model_from_dict
from .inequalities import (
    SettingProbs,
    correction_terms,
    weak_ch_bounds,
)
from .spaces import WeakChError

_CHUNK = 1 << 16


class BadModelFile(WeakChError):
    """A model file could not be read or does not describe a usable model."""


class UndefinedEstimate(WeakChError):
    """A required estimate has no observations behind it."""


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Run count, directions, setting distribution, and outcome source."""

    seed: int
    n: int
    theta: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    setting_probs: np.ndarray | None = None
    source: str | EprbModel = "singlet"

    def __post_init__(self):
        if self.n < 1:
            raise WeakChError(f"n must be at least 1, got {self.n}")
        if self.seed < 0:
            raise WeakChError("seed must be nonnegative")
        theta = tuple(float(t) for t in self.theta)
        if len(theta) != 4:
            raise WeakChError("theta must hold exactly four angles")
        sp = self.setting_probs
        if sp is None:
            sp = np.full((2, 2), 0.25)
        else:
            sp = np.asarray(sp, dtype=float)
            if sp.shape != (2, 2) or np.any(sp < 0.0):
                raise WeakChError("setting_probs must be a nonnegative 2x2 table")
            total = float(sp.sum())
            if abs(total - 1.0) > 1e-9:
                raise WeakChError(f"setting probabilities sum to {total}, not 1")
            sp = sp / total
        sp.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "setting_probs", sp)


@dataclass(frozen=True, eq=False)
class CountsTable:
    """Event counts per (setting pair, outcome pair); counts sum to n."""

    counts: np.ndarray
    n: int

    def pair_totals(self) -> np.ndarray:
        return self.counts.sum(axis=(2, 3))


def load_model(path: str | Path) -> EprbModel:
    try:
        data = json.loads(Path(path).read_text())
        model = model_from_dict(data)
    except (OSError, ValueError, KeyError, WeakChError) as exc:
        raise BadModelFile(f"cannot load model from {path}: {exc}") from exc
    if not isinstance(model, EprbModel):
        raise BadModelFile(f"{path} does not hold a full joint model")
    return model


def _outcome_tables(cfg: SimConfig) -> np.ndarray:
    if isinstance(cfg.source, EprbModel):
        return cfg.source.outcome_tables()
    if cfg.source == "singlet":
        t1, t2, t3, t4 = cfg.theta
        return singlet.outcome_tables((t1, t2), (t3, t4))
    return load_model(cfg.source).outcome_tables()


def sample_runs(cfg: SimConfig) -> CountsTable:
    """Draw cfg.n independent runs; deterministic for a given seed.

    Each run picks a setting pair from cfg.setting_probs and then an
    outcome pair from the source's conditional table. Counts are drawn as
    exact multinomials chunk by chunk, which realizes the same law as
    run-by-run sampling while keeping shard merges order-independent.
    """
    tables = _outcome_tables(cfg)
    sp_flat = cfg.setting_probs.ravel()
    out = np.zeros((4, 4), dtype=np.int64)
    remaining = cfg.n
    chunk_idx = 0
    while remaining > 0:
        take = min(_CHUNK, remaining)
        rng = np.random.default_rng([cfg.seed, chunk_idx])
        pair_counts = rng.multinomial(take, sp_flat)
        for pair, cnt in enumerate(pair_counts):
            if cnt:
                a, b = divmod(pair, 2)
                out[pair] += rng.multinomial(cnt, tables[a, b].ravel())
        remaining -= take
        chunk_idx += 1
    return CountsTable(counts=out.reshape(2, 2, 2, 2), n=cfg.n)


@dataclass(frozen=True, eq=False)
class Estimates:
    """Relative frequencies with Wald standard errors; NaN marks no data."""

    joint: np.ndarray
    joint_se: np.ndarray
    alice_plus: np.ndarray
    alice_plus_se: np.ndarray
    bob_plus: np.ndarray
    bob_plus_se: np.ndarray
    pair_counts: np.ndarray
    undefined: tuple[str, ...]


def _wald(k: float, n: float) -> tuple[float, float]:
    p = k / n
    return p, math.sqrt(p * (1.0 - p) / n)


def estimate(table: CountsTable) -> Estimates:
    """Conditional frequencies and standard errors from a counts table.

    Joint outcome probabilities condition on their setting pair; the
    single-wing estimates pool over the far setting. Unobserved
    conditioners produce NaN entries listed in undefined. Wald intervals
    are adequate away from degenerate probabilities; near 0 or 1 (aligned
    directions) they collapse to zero width.
    """
    counts = table.counts
    pair_n = counts.sum(axis=(2, 3))
    joint = np.full((2, 2, 2, 2), np.nan)
    joint_se = np.full((2, 2, 2, 2), np.nan)
    undefined = []
    for a in (0, 1):
        for b in (0, 1):
            n = pair_n[a, b]
            if n == 0:
                undefined.append(f"pair {a + 1}{b + 3}")
                continue
            for oa in (0, 1):
                for ob in (0, 1):
                    joint[a, b, oa, ob], joint_se[a, b, oa, ob] = _wald(
                        counts[a, b, oa, ob], n
                    )
    alice_plus = np.full(2, np.nan)
    alice_plus_se = np.full(2, np.nan)
    bob_plus = np.full(2, np.nan)
    bob_plus_se = np.full(2, np.nan)
    for a in (0, 1):
        n = counts[a].sum()
        if n == 0:
            undefined.append(f"alice setting {a + 1}")
            continue
        alice_plus[a], alice_plus_se[a] = _wald(counts[a, :, 0, :].sum(), n)
    for b in (0, 1):
        n = counts[:, b].sum()
        if n == 0:
            undefined.append(f"bob setting {b + 3}")
            continue
        bob_plus[b], bob_plus_se[b] = _wald(counts[:, b, :, 0].sum(), n)
    return Estimates(
        joint=joint,
        joint_se=joint_se,
        alice_plus=alice_plus,
        alice_plus_se=alice_plus_se,
        bob_plus=bob_plus,
        bob_plus_se=bob_plus_se,
        pair_counts=pair_n,
        undefined=tuple(undefined),
    )


@dataclass(frozen=True, eq=False)
class SampleTest:
    """Finite-sample inequality decision with its margins in sigma units.

    Error propagation treats the six terms as independent; the joint terms
    come from disjoint setting-pair subsamples, and the overlap between the
    two pooled marginals and the joints is conservatively ignored.
    """

    value: float
    se: float
    lower: float
    upper: float
    epsilon: float
    k_sigma: float
    violated_lower: bool
    violated_upper: bool
    margin_lower: float
    margin_upper: float
    terms: dict
    term_ses: dict


def test_inequality(
    est: Estimates,
    epsilon: float,
    k_sigma: float = 3.0,
    sp: SettingProbs | Sequence[SettingProbs] | None = None,
) -> SampleTest:
    """Check the estimated combination against the corrected interval.

    A violation is declared only when the bound is exceeded by more than
    k_sigma propagated standard errors. Margins report the signed distance
    past each bound in sigma units.
    """
    pairs = {"p13": (0, 0), "p14": (0, 1), "p24": (1, 1), "p23": (1, 0)}
    terms: dict[str, float] = {}
    ses: dict[str, float] = {}
    for name, (a, b) in pairs.items():
        terms[name] = float(est.joint[a, b, 0, 0])
        ses[name] = float(est.joint_se[a, b, 0, 0])
    terms["p1_plus"] = float(est.alice_plus[0])
    ses["p1_plus"] = float(est.alice_plus_se[0])
    terms["p4_plus"] = float(est.bob_plus[1])
    ses["p4_plus"] = float(est.bob_plus_se[1])
    bad = [k for k, v in terms.items() if math.isnan(v)]
    if bad:
        raise UndefinedEstimate(f"missing observations for {', '.join(bad)}")

    value = (
        terms["p13"] + terms["p14"] + terms["p24"]
        - terms["p23"] - terms["p1_plus"] - terms["p4_plus"]
    )
    se = math.sqrt(sum(s * s for s in ses.values()))

    if sp is None:
        sps = [SettingProbs(0.5, 0.5, 0.25)] * 4
    elif isinstance(sp, SettingProbs):
        sps = [sp] * 4
    else:
        sps = list(sp)
        if len(sps) != 4:
            raise WeakChError("need one SettingProbs or four, one per pair")
    cts = [correction_terms(epsilon, s) for s in sps]
    lower, upper = weak_ch_bounds(cts[0], cts[1], cts[2], cts[3])

    margin_lower = math.inf if se == 0.0 else (lower - value) / se
    margin_upper = math.inf if se == 0.0 else (value - upper) / se
    if se == 0.0:
        margin_lower = math.copysign(math.inf, lower - value) if lower != value else 0.0
        margin_upper = math.copysign(math.inf, value - upper) if value != upper else 0.0
    return SampleTest(
        value=value,
        se=se,
        lower=lower,
        upper=upper,
        epsilon=float(epsilon),
        k_sigma=float(k_sigma),
        violated_lower=value < lower - k_sigma * se,
        violated_upper=value > upper + k_sigma * se,
        margin_lower=margin_lower,
        margin_upper=margin_upper,
        terms=terms,
        term_ses=ses,
    )
