"""Survival metrics against literal-enumeration oracles and hand-computed tables."""

import math

import numpy as np
import pytest

from _oracles import (
    _u_statistic,
    concordance_enumerated,
    km_table,
    logrank_chi2,
    mwu_exact_enumeration_small,
    mwu_exact_meet_in_the_middle,
)

from orthofusion.metrics import (
    assign_risk_groups,
    chi2_1_sf,
    concordance_index,
    hazard_ratio,
    km_estimate,
    log_rank_test,
    mann_whitney_u,
)
from orthofusion.validation import ConfigError, NumericError, SurvivalBatch


def random_survival(rng, n, with_ties=True):
    if with_ties:
        times = rng.integers(1, 6, size=n).astype(float)
    else:
        times = rng.uniform(0.5, 10.0, size=n)
    events = rng.integers(0, 2, size=n)
    if events.sum() == 0:
        events[rng.integers(0, n)] = 1
    return times, events


# ---------------------------------------------------------------------------
# concordance


def test_concordance_perfect_and_inverted():
    sb = SurvivalBatch([1.0, 2.0, 3.0], [1, 1, 1])
    assert concordance_index([3.0, 2.0, 1.0], sb) == 1.0
    assert concordance_index([1.0, 2.0, 3.0], sb) == 0.0


def test_concordance_tied_risks_count_half():
    sb = SurvivalBatch([1.0, 2.0], [1, 1])
    assert concordance_index([0.7, 0.7], sb) == 0.5


@pytest.mark.parametrize("trial", range(40))
def test_concordance_matches_pairwise_enumeration(trial):
    rng = np.random.default_rng(500 + trial)
    n = int(rng.integers(3, 30))
    times, events = random_survival(rng, n)
    # quantized risks force occasional risk ties as well
    theta = np.round(rng.uniform(-2, 2, size=n), 1)
    ours = concordance_index(theta, SurvivalBatch(times, events))
    assert ours == concordance_enumerated(theta, times, events)


def test_concordance_complement_identity_without_risk_ties():
    rng = np.random.default_rng(11)
    for trial in range(20):
        times, events = random_survival(rng, 25, with_ties=False)
        theta = rng.standard_normal(25)
        sb = SurvivalBatch(times, events)
        total = concordance_index(theta, sb) + concordance_index(-theta, sb)
        assert abs(total - 1.0) < 1e-12


def test_concordance_invariant_under_increasing_transform():
    rng = np.random.default_rng(13)
    times, events = random_survival(rng, 30)
    theta = rng.uniform(-2, 2, size=30)
    sb = SurvivalBatch(times, events)
    base = concordance_index(theta, sb)
    assert concordance_index(3.0 * theta + 5.0, sb) == base
    assert concordance_index(np.exp(theta), sb) == base


def test_concordance_no_comparable_pairs_raises():
    with pytest.raises(ConfigError):
        concordance_index([1.0, 2.0], SurvivalBatch([1.0, 2.0], [0, 0]))


# ---------------------------------------------------------------------------
# Kaplan-Meier


def test_km_hand_table_with_tied_event_and_censor():
    curve = km_estimate(SurvivalBatch([1.0, 2.0, 2.0, 3.0], [1, 0, 1, 1]))
    assert np.array_equal(curve.times, [1.0, 2.0, 3.0])
    assert np.allclose(curve.survival, [0.75, 0.5, 0.0], atol=1e-12)
    assert np.array_equal(curve.at_risk, [4, 3, 1])
    assert np.array_equal(curve.events, [1, 1, 1])
    assert np.array_equal(curve.censored, [0, 1, 0])


def test_km_no_censoring_matches_empirical_survival():
    curve = km_estimate(SurvivalBatch([1.0, 2.0, 3.0], [1, 1, 1]))
    assert np.allclose(curve.survival, [2 / 3, 1 / 3, 0.0], atol=1e-15)


def test_km_all_censored_stays_at_one():
    curve = km_estimate(SurvivalBatch([1.0, 2.0], [0, 0]))
    assert np.all(curve.survival == 1.0)


@pytest.mark.parametrize("trial", range(25))
def test_km_matches_oracle_table(trial):
    rng = np.random.default_rng(900 + trial)
    times, events = random_survival(rng, int(rng.integers(3, 40)))
    curve = km_estimate(SurvivalBatch(times, events))
    o_times, o_surv = km_table(times, events)
    # the oracle tabulates event times only; our curve lists every distinct time
    at_events = curve.events > 0
    assert np.array_equal(curve.times[at_events], o_times)
    assert np.allclose(curve.survival[at_events], o_surv, atol=1e-12)


# ---------------------------------------------------------------------------
# log-rank


def test_logrank_identical_groups_is_null():
    group = SurvivalBatch([1.0, 2.0, 3.0, 4.0], [1, 1, 0, 1])
    result = log_rank_test(group, group)
    assert result.statistic == pytest.approx(0.0, abs=1e-12)
    assert result.p_value == pytest.approx(1.0, abs=1e-12)


def test_logrank_hand_computed_table():
    # group A: events at t=1 and t=2; group B: event at t=2, censored at t=3
    # t=1: n=4, nA=2, d=1 -> E_A=1/2, V=1/4
    # t=2: n=3, nA=1, d=2 -> E_A=2/3, V=2/9
    # chi2 = (1 - 1/2 + 1 - 2/3)^2 / (1/4 + 2/9) = (5/6)^2 / (17/36) = 25/17
    group_a = SurvivalBatch([1.0, 2.0], [1, 1])
    group_b = SurvivalBatch([2.0, 3.0], [1, 0])
    result = log_rank_test(group_a, group_b)
    assert result.statistic == pytest.approx(25.0 / 17.0, abs=1e-6)
    assert result.p_value == pytest.approx(chi2_1_sf(25.0 / 17.0), abs=1e-12)


@pytest.mark.parametrize("trial", range(30))
def test_logrank_matches_literal_oracle(trial):
    rng = np.random.default_rng(1700 + trial)
    na, nb = int(rng.integers(3, 20)), int(rng.integers(3, 20))
    times_a, events_a = random_survival(rng, na)
    times_b, events_b = random_survival(rng, nb)
    ours = log_rank_test(SurvivalBatch(times_a, events_a), SurvivalBatch(times_b, events_b))
    expected = logrank_chi2(times_a, events_a, times_b, events_b)
    assert ours.statistic == pytest.approx(expected, abs=1e-9)


def test_logrank_separated_groups_is_significant():
    rng = np.random.default_rng(5)
    t_a = rng.exponential(1.0, size=20)
    ones = np.ones(20, dtype=int)
    result = log_rank_test(SurvivalBatch(t_a, ones), SurvivalBatch(t_a + 10.0, ones))
    assert result.p_value < 1e-3


def test_logrank_requires_events():
    with pytest.raises(ConfigError):
        log_rank_test(SurvivalBatch([1.0], [0]), SurvivalBatch([2.0], [0]))


def test_chi2_survival_function_closed_point():
    # 0.95 quantile of a 1-dof chi-square
    assert chi2_1_sf(3.8414588206941236) == pytest.approx(0.05, abs=1e-9)
    assert chi2_1_sf(0.0) == 1.0


# ---------------------------------------------------------------------------
# hazard ratio


def test_hazard_ratio_mirrored_groups_is_one():
    times = np.array([1.0, 2.0, 3.0, 1.0, 2.0, 3.0])
    events = np.ones(6, dtype=int)
    labels = np.array([1, 1, 1, 0, 0, 0])
    result = hazard_ratio(labels, (times, events))
    assert result.hazard_ratio == pytest.approx(1.0, abs=1e-12)
    assert result.ci_low < 1.0 < result.ci_high


def test_hazard_ratio_closed_form_four_patients():
    # alternating events at t=1(x=1), 2(x=0), 3(x=1), 4(x=0); the score
    # equation reduces to u^2 - u - 4 = 0 with u = exp(beta)
    times = np.array([1.0, 2.0, 3.0, 4.0])
    events = np.ones(4, dtype=int)
    labels = np.array([1, 0, 1, 0])
    expected = (1.0 + math.sqrt(17.0)) / 2.0
    result = hazard_ratio(labels, (times, events))
    assert result.hazard_ratio == pytest.approx(expected, abs=1e-6)


def test_hazard_ratio_label_flip_inverts():
    rng = np.random.default_rng(23)
    times = rng.exponential(2.0, size=30)
    events = np.ones(30, dtype=int)
    labels = rng.integers(0, 2, size=30)
    labels[:4] = [0, 0, 1, 1]
    hr = hazard_ratio(labels, (times, events)).hazard_ratio
    flipped = hazard_ratio(1 - labels, (times, events)).hazard_ratio
    assert hr * flipped == pytest.approx(1.0, abs=1e-9)


def test_hazard_ratio_monotone_likelihood_detected():
    # complete separation: every group-1 event precedes all group-0 times
    times = np.array([1.0, 2.0, 10.0, 11.0])
    events = np.ones(4, dtype=int)
    labels = np.array([1, 1, 0, 0])
    with pytest.raises(NumericError, match="monotone"):
        hazard_ratio(labels, (times, events))


def test_hazard_ratio_validation():
    with pytest.raises(ConfigError):
        hazard_ratio([0, 2], ([1.0, 2.0], [1, 1]))
    # group 1 entirely censored
    with pytest.raises(ConfigError):
        hazard_ratio([0, 0, 1], ([1.0, 2.0, 3.0], [1, 1, 0]))


# ---------------------------------------------------------------------------
# Mann-Whitney


def test_mwu_fully_separated_tiny_case():
    result = mann_whitney_u([1.0, 2.0], [3.0, 4.0])
    assert result.statistic == 0.0
    # 2 of the 6 equally likely label arrangements are at least this extreme
    assert result.p_value == pytest.approx(1.0 / 3.0, abs=1e-12)
    assert result.method == "exact"


def test_mwu_identical_samples_p_one():
    result = mann_whitney_u([5.0, 5.0, 5.0], [5.0, 5.0, 5.0])
    assert result.p_value == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("trial", range(30))
def test_mwu_exact_matches_literal_enumeration(trial):
    rng = np.random.default_rng(2100 + trial)
    na, nb = int(rng.integers(2, 7)), int(rng.integers(2, 7))
    # coarse grid keeps ties frequent
    a = rng.integers(0, 5, size=na).astype(float)
    b = rng.integers(0, 5, size=nb).astype(float)
    ours = mann_whitney_u(a, b)
    assert ours.statistic == pytest.approx(_u_statistic(a, b), abs=1e-12)
    assert ours.p_value == pytest.approx(mwu_exact_enumeration_small(a, b), abs=1e-9)
    assert ours.method == "exact"


@pytest.mark.parametrize("trial", range(5))
def test_mwu_exact_matches_meet_in_the_middle_at_fifteen(trial):
    rng = np.random.default_rng(3100 + trial)
    a = rng.integers(0, 8, size=15).astype(float)
    b = rng.integers(0, 8, size=15).astype(float)
    ours = mann_whitney_u(a, b)
    assert ours.statistic == pytest.approx(_u_statistic(a, b), abs=1e-12)
    assert ours.p_value == pytest.approx(mwu_exact_meet_in_the_middle(a, b), abs=1e-9)


def test_mwu_oracles_agree_with_each_other():
    rng = np.random.default_rng(41)
    for _ in range(10):
        a = rng.integers(0, 4, size=5).astype(float)
        b = rng.integers(0, 4, size=6).astype(float)
        p1 = mwu_exact_enumeration_small(a, b)
        p2 = mwu_exact_meet_in_the_middle(a, b)
        assert p1 == pytest.approx(p2, abs=1e-9)


def test_mwu_large_samples_use_normal_approximation():
    rng = np.random.default_rng(31)
    a = rng.normal(0.0, 1.0, size=25)
    b = rng.normal(0.8, 1.0, size=25)
    result = mann_whitney_u(a, b)
    assert result.method == "normal-approximation"
    assert 0.0 < result.p_value < 1.0


def test_mwu_normal_path_continuous_with_exact_at_boundary():
    # 20x20 runs exact; the same data shifted into the normal path by one
    # extra observation should land near the exact answer
    rng = np.random.default_rng(37)
    a = rng.normal(0.0, 1.0, size=20)
    b = rng.normal(0.4, 1.0, size=20)
    exact_p = mann_whitney_u(a, b).p_value
    approx = mann_whitney_u(a, np.append(b, b.mean()))
    assert approx.method == "normal-approximation"
    assert abs(approx.p_value - exact_p) < 0.05


def test_mwu_degenerate_all_tied_large():
    a = np.full(30, 2.0)
    b = np.full(30, 2.0)
    result = mann_whitney_u(a, b)
    assert result.p_value == 1.0


def test_mwu_validation():
    with pytest.raises(ConfigError):
        mann_whitney_u([], [1.0])
    with pytest.raises(ConfigError):
        mann_whitney_u([1.0], [])


# ---------------------------------------------------------------------------
# risk groups


def test_assign_risk_groups_strict_zero_threshold():
    groups = assign_risk_groups([-1.0, 0.0, 1e-12, 3.0])
    assert np.array_equal(groups, [0, 0, 1, 1])
    assert groups.dtype == np.int64
