import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import aligned_cause_joint, build_product_model, uniform_settings
from weakch.common_cause import (
    BadModel,
    EprbModel,
    GenerationFailed,
    PairwiseCcModel,
    PreconditionViolated,
    UnnormalizedInput,
    build_aggregate_cause,
    cell_stats,
    ch_atom_oracle,
    check_cause_mass_bounds,
    classify_cells,
    joint_cause_bounds_check,
    model_epsilon,
    model_from_dict,
    pairwise_model_from_dict,
    pairwise_model_to_dict,
    random_eprb_model,
    random_screened_model,
    validate_loc,
    validate_no_conspiracy,
    validate_screening,
)
from weakch.spaces import FiniteProbSpace, make_space, prob


# ---------------------------------------------------------------------------
# 16-atom oracle
# ---------------------------------------------------------------------------


def unit_atoms(i):
    p = [0.0] * 16
    p[i] = 1.0
    return p


def test_oracle_all_events_atom():
    # atom (A, A', B, B') all true: 1 + 1 + 1 - 1 - 1 - 1
    res = ch_atom_oracle(unit_atoms(0b1111))
    assert res.value == 0.0
    assert res.identity_value == 0.0


def test_oracle_negative_atom():
    # atom with A false, the rest true
    res = ch_atom_oracle(unit_atoms(0b0111))
    assert res.value == -1.0
    assert res.identity_value == -1.0
    assert res.in_bounds


def test_oracle_uniform_distribution():
    res = ch_atom_oracle([1.0 / 16.0] * 16)
    assert res.value == pytest.approx(-0.5, abs=1e-15)
    assert res.identity_value == pytest.approx(-0.5, abs=1e-15)


def test_oracle_every_unit_atom_matches_identity():
    for i in range(16):
        res = ch_atom_oracle(unit_atoms(i))
        assert res.value == res.identity_value
        assert -1.0 <= res.value <= 0.0


def test_oracle_rejects_bad_input():
    with pytest.raises(UnnormalizedInput):
        ch_atom_oracle([0.1] * 15)
    with pytest.raises(UnnormalizedInput):
        ch_atom_oracle([0.5] * 16)
    bad = [0.0] * 16
    bad[0], bad[1] = 1.1, -0.1
    with pytest.raises(UnnormalizedInput):
        ch_atom_oracle(bad)


@settings(deadline=None, max_examples=300)
@given(st.lists(st.floats(1e-9, 1.0), min_size=16, max_size=16))
def test_oracle_identity_and_range_on_simplex(raw):
    total = sum(raw)
    probs = [v / total for v in raw]
    res = ch_atom_oracle(probs)
    assert abs(res.value - res.identity_value) <= 1e-12
    assert -1.0 - 1e-12 <= res.value <= 1e-12
    assert res.in_bounds


# ---------------------------------------------------------------------------
# pairwise models and the mass bounds
# ---------------------------------------------------------------------------


def det_two_cell_model():
    return random_screened_model(1, 2, 0.0)


def test_generator_deterministic_two_cell():
    m = det_two_cell_model()
    stats = cell_stats(m)
    assert np.allclose(stats.mass, [0.5, 0.5])
    assert stats.cond_a.tolist() == [1.0, 0.0]
    assert stats.cond_b.tolist() == [1.0, 0.0]
    assert model_epsilon(m) == 0.0


def test_generator_single_cell_fails():
    with pytest.raises(GenerationFailed):
        random_screened_model(3, 1, 0.1)


def test_generator_rejects_large_target():
    with pytest.raises(GenerationFailed):
        random_screened_model(3, 4, 0.5)


def test_generator_hits_target_and_revalidates():
    m = random_screened_model(7, 8, 0.01)
    assert abs(model_epsilon(m) - 0.01) <= 1e-6
    assert prob(m.space, m.event_a) == pytest.approx(0.5, abs=1e-9)
    assert prob(m.space, m.event_b) == pytest.approx(0.5, abs=1e-9)
    assert m.screening().max_abs <= 1e-12
    assert check_cause_mass_bounds(m).ok


def test_generator_is_deterministic():
    a = random_screened_model(123, 9, 0.07)
    b = random_screened_model(123, 9, 0.07)
    assert a.space.weights.tolist() == b.space.weights.tolist()
    assert a.cells == b.cells


def test_classify_deterministic_model():
    classes = classify_cells(det_two_cell_model())
    assert classes.high == (0,)
    assert classes.low == (1,)
    assert classes.mid == ()


def test_classify_independent_halves_single_cell_goes_low():
    # A and B independent halves of a uniform four-atom space, one cell:
    # deficit 1/2, border sqrt(1/2) ~ 0.707, and the 0.5 conditional falls
    # at or below it.
    sp = make_space([0.25] * 4, atoms=["ab", "aB", "Ab", "AB"])
    m = PairwiseCcModel(sp, frozenset({"ab", "aB"}), frozenset({"ab", "Ab"}), (sp.full_event(),))
    classes = classify_cells(m)
    assert classes.epsilon == pytest.approx(0.5, abs=1e-12)
    assert classes.low == (0,)
    assert classes.high == ()


def test_classify_trichotomy_is_exhaustive():
    m = random_screened_model(11, 10, 0.01)
    classes = classify_cells(m)
    seen = sorted(classes.high + classes.mid + classes.low)
    assert seen == list(range(len(m.cells)))
    assert not (set(classes.high) & set(classes.mid))
    assert not (set(classes.high) & set(classes.low))
    assert not (set(classes.mid) & set(classes.low))


def mid_cell_model(mid_mass=0.02):
    # two deterministic cells plus one balanced middle cell
    half = (1.0 - mid_mass) / 2.0
    weights, atoms, cells = [], [], []
    for i, (mass, q) in enumerate([(half, 1.0), (half, 0.0), (mid_mass, 0.5)]):
        labels = [f"c{i}:{s}" for s in ("11", "10", "01", "00")]
        atoms.extend(labels)
        weights.extend([mass * q * q, mass * q * (1 - q), mass * (1 - q) * q, mass * (1 - q) ** 2])
        cells.append(frozenset(labels))
    sp = FiniteProbSpace(tuple(atoms), np.asarray(weights))
    a = frozenset(x for x in atoms if x.endswith("11") or x.endswith("10"))
    b = frozenset(x for x in atoms if x.endswith("11") or x.endswith("01"))
    return PairwiseCcModel(sp, a, b, tuple(cells))


def test_mid_cells_are_classified_and_bounded():
    m = mid_cell_model()
    classes = classify_cells(m)
    assert classes.mid == (2,)
    rep = check_cause_mass_bounds(m)
    assert rep.ok
    assert rep.epsilon == pytest.approx(0.01, abs=1e-12)


def test_cause_mass_bounds_deterministic_edge():
    rep = check_cause_mass_bounds(det_two_cell_model())
    assert rep.epsilon == 0.0
    assert rep.high_mass == rep.p_a == 0.5
    assert rep.lower_ok and rep.upper_ok


def test_cause_mass_bounds_random_sweep():
    rng = np.random.default_rng(204)
    for _ in range(200):
        n_cells = int(rng.integers(2, 17))
        eps = float(rng.uniform(1e-6, 0.25))
        rep = check_cause_mass_bounds(random_screened_model(rng, n_cells, eps))
        assert rep.ok
        assert rep.diagnostics["a_not_b_mass"] == pytest.approx(rep.epsilon / 2, abs=1e-9)
        assert rep.diagnostics["b_not_a_mass"] == pytest.approx(rep.epsilon / 2, abs=1e-9)
        assert rep.diagnostics["mid_gap_sum"] <= rep.epsilon + 1e-9
        assert rep.diagnostics["wide_mid_mass"] <= 2.0 * math.sqrt(rep.epsilon) + 1e-9


def test_subset_sums_stay_below_half_eps():
    m = random_screened_model(31, 12, 0.05)
    stats = cell_stats(m)
    eps = model_epsilon(m)
    rng = np.random.default_rng(5)
    for _ in range(100):
        mask = rng.integers(0, 2, size=stats.mass.size).astype(bool)
        sub = float(np.sum(stats.cond_a[mask] * (1 - stats.cond_b[mask]) * stats.mass[mask]))
        assert -1e-12 <= sub <= eps / 2 + 1e-9
        sub_b = float(np.sum(stats.cond_b[mask] * (1 - stats.cond_a[mask]) * stats.mass[mask]))
        assert -1e-12 <= sub_b <= eps / 2 + 1e-9


def test_cause_mass_bounds_rejects_broken_screening():
    m = random_screened_model(2, 4, 0.01)
    w = m.space.weights.copy()
    w[0] += 0.1
    broken = PairwiseCcModel(
        FiniteProbSpace(m.space.atoms, w), m.event_a, m.event_b, m.cells
    )
    with pytest.raises(PreconditionViolated):
        check_cause_mass_bounds(broken)


def test_cause_mass_bounds_rejects_uneven_marginals():
    # deterministic cells screen exactly, but the marginal is 0.6
    sp = make_space([0.6, 0.4], atoms=["ab", "none"])
    m = PairwiseCcModel(sp, frozenset({"ab"}), frozenset({"ab"}), ({"ab"}, {"none"}))
    with pytest.raises(PreconditionViolated):
        check_cause_mass_bounds(m)
    with pytest.raises(PreconditionViolated):
        classify_cells(m)


def test_zero_mass_cells_go_low_and_are_skipped():
    sp = make_space([0.5, 0.5, 0.0, 0.0], atoms=["a1", "a2", "z1", "z2"])
    m = PairwiseCcModel(sp, frozenset({"a1"}), frozenset({"a1"}), ({"a1"}, {"a2"}, {"z1", "z2"}))
    classes = classify_cells(m)
    assert 2 in classes.low
    assert m.screening().skipped_cells == (2,)


def test_pairwise_json_roundtrip():
    m = random_screened_model(8, 5, 0.03)
    back = pairwise_model_from_dict(pairwise_model_to_dict(m))
    assert back.space.atoms == m.space.atoms
    assert back.space.weights.tolist() == m.space.weights.tolist()
    assert back.cells == m.cells


# ---------------------------------------------------------------------------
# full joint models
# ---------------------------------------------------------------------------


def perfect_model():
    plus = [(1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]
    return build_product_model(uniform_settings(), aligned_cause_joint(), plus)


def test_eprb_model_validation():
    with pytest.raises(BadModel):
        EprbModel(np.ones((2, 2, 2, 2, 2, 2, 2)), (2, 2, 2, 2))
    w = np.zeros((2, 2, 2, 2, 2, 2, 2, 2))
    w[0, 0, 0, 0, 0, 0, 0, 0] = 1.0  # only one setting pair carries mass
    with pytest.raises(BadModel):
        EprbModel(w, (2, 2, 2, 2))


def test_eprb_json_roundtrip():
    m = random_eprb_model(5, (2, 3, 2, 2), 1e-3)
    back = model_from_dict(m.to_dict())
    assert isinstance(back, EprbModel)
    assert back.cause_cards == m.cause_cards
    assert np.array_equal(back.weights, m.weights)


def test_generated_model_passes_all_validators():
    rng = np.random.default_rng(40)
    for _ in range(10):
        cards = tuple(int(c) for c in rng.integers(2, 5, size=4))
        target = float(rng.uniform(1e-6, 1e-3))
        m = random_eprb_model(rng, cards, target)
        assert validate_loc(m).max_abs <= 1e-12
        assert validate_no_conspiracy(m).max_abs <= 1e-12
        assert validate_screening(m).max_abs <= 1e-12
        prof = m.profile()
        assert 0.0 < prof.eps_global <= target * (1 + 1e-9)
        for a in (0, 1):
            assert m.alice_plus(a) == pytest.approx(0.5, abs=1e-12)
        for b in (0, 1):
            assert m.bob_plus(b) == pytest.approx(0.5, abs=1e-12)


def test_generated_model_is_deterministic():
    a = random_eprb_model(77, (2, 2, 3, 2), 5e-4)
    b = random_eprb_model(77, (2, 2, 3, 2), 5e-4)
    assert np.array_equal(a.weights, b.weights)


def test_generator_rejects_bad_arguments():
    with pytest.raises(BadModel):
        random_eprb_model(1, (1, 2, 2, 2), 1e-3)
    with pytest.raises(GenerationFailed):
        random_eprb_model(1, (2, 2, 2, 2), 0.5)


def test_loc_detects_far_setting_influence():
    m = perfect_model()
    w = m.weights.copy()
    # let Bob's second setting flip Alice's outcome distribution
    w[0, 1] = w[0, 1][::-1, :, :, :, :, :]
    broken = EprbModel(w, m.cause_cards)
    assert validate_loc(broken).max_abs > 0.1


def test_loc_skips_zero_mass_cells():
    cause = np.zeros((3, 2, 2, 2))
    cause[(0,) * 4] = 0.5
    cause[1, 1, 1, 1] = 0.5  # cell 2 of the first variable never occurs
    plus = [(1.0, 0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]
    m = build_product_model(uniform_settings(), cause, plus)
    rep = validate_loc(m)
    assert rep.max_abs <= 1e-12
    assert any("c1=2" in s for s in rep.skipped)


def test_no_conspiracy_detects_setting_cause_coupling():
    m = perfect_model()
    w = m.weights.copy()
    w[0, :, :, :, 0] *= 1.5  # cause value 0 made more likely under setting a1
    broken = EprbModel(w, m.cause_cards)
    assert validate_no_conspiracy(broken).max_abs > 1e-3


def test_screening_holds_for_any_product_kernels():
    rng = np.random.default_rng(3)
    cause = aligned_cause_joint(p_pattern=0.37)
    plus = [tuple(rng.uniform(0, 1, 2)) for _ in range(4)]
    m = build_product_model(uniform_settings(), cause, plus)
    assert validate_screening(m).max_abs <= 1e-12


def test_screening_detects_cross_cause_outcomes():
    # Alice's first direction reads the second variable: its own cells no
    # longer factorize the pair
    cause = np.zeros((2, 2, 2, 2))
    cause[0, 0, 0, 0] = 0.25
    cause[0, 1, 1, 1] = 0.25
    cause[1, 0, 0, 0] = 0.25
    cause[1, 1, 1, 1] = 0.25  # c1 fair and independent of the pattern
    plus = [(1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]
    m = build_product_model(uniform_settings(), cause, plus, attach=(1, 1, 2, 3))
    assert validate_screening(m).max_abs > 0.2


def test_aggregate_cause_includes_forcing_and_boundary_cells():
    # first variable has a sure cell, a boundary cell with conditional
    # exactly 1 - sqrt(eps), and an opposite-group cell; the boundary cell
    # carries weight sqrt(t) so the direction deficit lands exactly at t
    t = 0.0025
    root = math.sqrt(t)
    w = root
    cause = np.zeros((3, 2, 2, 2))
    cause[0, 0, 0, 0] = 0.5 * (1.0 - w)
    cause[1, 0, 0, 0] = 0.5 * w
    cause[2, 1, 1, 1] = 0.5
    plus = [(1.0, 1.0 - root, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]
    m = build_product_model(uniform_settings(), cause, plus)
    prof = m.profile()
    assert prof.eps_a[0] == pytest.approx(t, rel=1e-9)
    agg = build_aggregate_cause(m, "alice", 0, profile=prof)
    assert 0 in agg.cells  # conditional exactly 1
    assert 1 in agg.cells  # conditional exactly at the cutoff
    assert 2 not in agg.cells


def test_aggregate_cause_empty_when_cells_uninformative():
    # Alice's first direction reads the second variable, so its own cells
    # all sit at one half while the deficit stays zero
    cause = np.zeros((2, 2, 2, 2))
    cause[0, 0, 0, 0] = 0.25
    cause[0, 1, 1, 1] = 0.25
    cause[1, 0, 0, 0] = 0.25
    cause[1, 1, 1, 1] = 0.25
    plus = [(1.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.0, 1.0)]
    m = build_product_model(uniform_settings(), cause, plus, attach=(1, 1, 2, 3))
    prof = m.profile()
    assert prof.eps_a[0] == 0.0
    agg = build_aggregate_cause(m, "alice", 0, profile=prof)
    assert agg.cells == ()
    agg2 = build_aggregate_cause(m, "alice", 1, profile=prof)
    assert agg2.cells == (0,)


def test_joint_cause_bounds_perfect_model_equality():
    m = perfect_model()
    rep = joint_cause_bounds_check(m)
    assert rep.epsilon == 0.0
    for pair in rep.pairs:
        assert pair.p_joint_cause == pair.p_plus_plus == 0.0
        assert pair.lower_ok and pair.upper_ok


def test_joint_cause_bounds_generated_sweep():
    rng = np.random.default_rng(90)
    for _ in range(30):
        cards = tuple(int(c) for c in rng.integers(2, 4, size=4))
        m = random_eprb_model(rng, cards, float(rng.uniform(1e-6, 1e-3)))
        assert joint_cause_bounds_check(m).ok


def test_joint_cause_bounds_rejects_conspiracy():
    m = perfect_model()
    w = m.weights.copy()
    w[0, :, :, :, 0] *= 1.5
    with pytest.raises(PreconditionViolated):
        joint_cause_bounds_check(EprbModel(w, m.cause_cards))


def test_joint_cause_bounds_accepts_eps_override():
    m = random_eprb_model(12, (2, 2, 2, 2), 5e-4)
    rep = joint_cause_bounds_check(m, eps_override=1e-3)
    assert rep.epsilon == 1e-3
    assert rep.ok


def test_weak_report_matches_components():
    m = random_eprb_model(9, (2, 2, 2, 2), 1e-3)
    rep = m.weak_report()
    assert rep.epsilon == m.profile().eps_global
    assert rep.value == pytest.approx(m.ch_value(), abs=1e-15)
    assert not rep.violated
