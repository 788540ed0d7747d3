"""Cox partial likelihood and orthogonalization loss against oracles and closed forms."""

import math

import numpy as np
import pytest

from _gradcheck import check_gradients
from _oracles import cox_loss_enumerated, nuclear_norm_via_gram

from orthofusion.autodiff import Adam, backward, constant, param
from orthofusion.losses import combined_loss, cox_pl_loss, mmo_loss
from orthofusion.validation import ConfigError, SurvivalBatch

RNG = np.random.default_rng(42)


def theta_tensor(values):
    return constant(np.asarray(values, dtype=float).reshape(1, -1))


# ---------------------------------------------------------------------------
# Cox partial likelihood


def test_cox_symmetric_two_patient_case():
    theta = param(np.zeros((1, 2)), "theta")
    sb = SurvivalBatch([1.0, 2.0], [1, 1])
    loss = cox_pl_loss(theta, sb)
    assert abs(loss.item() - math.log(2.0)) < 1e-12
    backward(loss)
    assert np.allclose(theta.grad, [[-0.5, 0.5]], atol=0)


def test_cox_all_censored_returns_zero_with_warning():
    theta = theta_tensor([0.3, -0.2])
    with pytest.warns(RuntimeWarning, match="all-censored"):
        loss = cox_pl_loss(theta, SurvivalBatch([1.0, 2.0], [0, 0]))
    assert loss.item() == 0.0


@pytest.mark.parametrize("trial", range(50))
def test_cox_matches_enumerated_risk_set_oracle(trial):
    rng = np.random.default_rng(1000 + trial)
    n = int(rng.integers(2, 9))
    # ties arise from the coarse time grid
    times = rng.integers(1, 5, size=n).astype(float)
    events = rng.integers(0, 2, size=n)
    if events.sum() == 0:
        events[rng.integers(0, n)] = 1
    theta = rng.uniform(-3, 3, size=n)
    ours = cox_pl_loss(theta_tensor(theta), SurvivalBatch(times, events)).item()
    assert abs(ours - cox_loss_enumerated(theta, times, events)) < 1e-12


def test_cox_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    theta = param(rng.uniform(-2, 2, size=(1, 6)), "theta")
    sb = SurvivalBatch([3.0, 1.0, 2.0, 2.0, 5.0, 4.0], [1, 1, 0, 1, 0, 1])
    assert check_gradients(lambda: cox_pl_loss(theta, sb), [theta]) < 1e-7


def test_cox_shift_invariance_single_shared_risk_set():
    # one event at the earliest time puts every patient in its risk set
    times = [1.0, 2.0, 3.0, 4.0]
    events = [1, 0, 0, 0]
    theta = np.array([0.4, -1.2, 0.7, 2.0])
    base = cox_pl_loss(theta_tensor(theta), SurvivalBatch(times, events)).item()
    shifted = cox_pl_loss(theta_tensor(theta + 5.0), SurvivalBatch(times, events)).item()
    assert abs(base - shifted) < 1e-12


def test_cox_extreme_scores_stay_finite():
    theta = theta_tensor([600.0, -600.0, 0.0])
    loss = cox_pl_loss(theta, SurvivalBatch([1.0, 2.0, 3.0], [1, 1, 1]))
    assert np.isfinite(loss.item())


def test_cox_validation_errors():
    with pytest.raises(ConfigError):
        cox_pl_loss(theta_tensor([0.0]), SurvivalBatch([1.0], [1]))
    with pytest.raises(ConfigError):
        cox_pl_loss(theta_tensor([0.0, 1.0, 2.0]), SurvivalBatch([1.0, 2.0], [1, 1]))


# ---------------------------------------------------------------------------
# orthogonalization loss


def scaled_to_min_norm(a, floor=1.5):
    """Rescale so the nuclear norm is comfortably above the max(1, .) floor."""
    return a * (floor / nuclear_norm_via_gram(a))


def test_mmo_single_modality_above_floor_is_zero():
    h = scaled_to_min_norm(RNG.standard_normal((4, 6)))
    assert abs(mmo_loss([constant(h)]).item()) < 1e-12


def test_mmo_orthogonal_column_spaces_is_zero():
    h1 = np.zeros((5, 4))
    h2 = np.zeros((5, 4))
    h1[:2, :] = RNG.standard_normal((2, 4))
    h2[2:, :] = RNG.standard_normal((3, 4))
    h1 = scaled_to_min_norm(h1)
    h2 = scaled_to_min_norm(h2)
    assert abs(mmo_loss([constant(h1), constant(h2)]).item()) < 1e-9


def test_mmo_duplicated_embeddings_closed_form():
    a = scaled_to_min_norm(RNG.standard_normal((3, 5)), floor=2.5)
    n = a.shape[1]
    expected = (2.0 - math.sqrt(2.0)) * nuclear_norm_via_gram(a) / (2.0 * n)
    got = mmo_loss([constant(a), constant(a)]).item()
    assert abs(got - expected) < 1e-9


def test_mmo_nonnegative_on_random_embeddings():
    for trial in range(100):
        rng = np.random.default_rng(trial)
        m = int(rng.integers(1, 4))
        hs = [constant(scaled_to_min_norm(rng.standard_normal((4, 5)))) for _ in range(m)]
        assert mmo_loss(hs).item() >= -1e-12


def test_mmo_invariant_under_common_left_rotation():
    rng = np.random.default_rng(3)
    hs = [rng.standard_normal((4, 6)) for _ in range(3)]
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    base = mmo_loss([constant(h) for h in hs]).item()
    rotated = mmo_loss([constant(q @ h) for h in hs]).item()
    assert abs(base - rotated) < 1e-9


def test_mmo_scaling_modes():
    rng = np.random.default_rng(9)
    hs = [scaled_to_min_norm(rng.standard_normal((3, 4))) for _ in range(2)]
    tensors = [constant(h) for h in hs]
    m, n = 2, 4
    diff = mmo_loss(tensors, scaling="difference").item()
    sum_only = mmo_loss(tensors, scaling="sum-only").item()
    norms = [max(1.0, nuclear_norm_via_gram(h)) for h in hs]
    joint = nuclear_norm_via_gram(np.concatenate(hs, axis=1))
    assert abs(diff - (sum(norms) - joint) / (m * n)) < 1e-9
    assert abs(sum_only - (sum(norms) / (m * n) - joint)) < 1e-9
    with pytest.raises(ConfigError):
        mmo_loss(tensors, scaling="whole")
    with pytest.raises(ConfigError):
        mmo_loss([])
    with pytest.raises(ConfigError):
        mmo_loss([tensors[0], constant(np.ones((2, 2)))])


def test_mmo_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    h1 = param(rng.standard_normal((4, 6)) * 2.0, "h1")
    h2 = param(rng.standard_normal((4, 6)) * 2.0, "h2")
    assert check_gradients(lambda: mmo_loss([h1, h2]), [h1, h2]) < 1e-5


def test_mmo_minimization_reduces_loss_while_norms_stay_floored():
    rng = np.random.default_rng(17)
    h1 = param(rng.standard_normal((4, 12)), "h1")
    h2 = param(rng.standard_normal((4, 12)), "h2")
    opt = Adam({"h1": h1, "h2": h2}, lr=0.05)
    initial = mmo_loss([h1, h2]).item()
    for _ in range(200):
        loss = mmo_loss([h1, h2])
        backward(loss)
        opt.step()
    final = mmo_loss([h1, h2]).item()
    assert final < 0.1 * initial
    assert nuclear_norm_via_gram(h1.value) >= 1.0
    assert nuclear_norm_via_gram(h2.value) >= 1.0


# ---------------------------------------------------------------------------
# combination


def test_combined_gamma_zero_equals_cox_exactly():
    rng = np.random.default_rng(2)
    theta = theta_tensor(rng.uniform(-1, 1, 5))
    sb = SurvivalBatch([1.0, 2.0, 3.0, 4.0, 5.0], [1, 0, 1, 1, 0])
    hs = [constant(rng.standard_normal((3, 5)))]
    combo = combined_loss(theta, sb, hs, gamma=0.0)
    assert combo.total.item() == cox_pl_loss(theta, sb).item()
    assert combo.orthogonality is None


def test_combined_linearity_in_gamma():
    rng = np.random.default_rng(4)
    theta = theta_tensor(rng.uniform(-1, 1, 5))
    sb = SurvivalBatch([1.0, 2.0, 3.0, 4.0, 5.0], [1, 0, 1, 1, 0])
    hs = [constant(rng.standard_normal((3, 5))) for _ in range(2)]
    at_1 = combined_loss(theta, sb, hs, gamma=1.0)
    at_2 = combined_loss(theta, sb, hs, gamma=2.0)
    assert at_1.orthogonality == pytest.approx(at_2.orthogonality)
    assert at_2.value - at_1.value == pytest.approx(at_1.orthogonality, abs=1e-12)
    assert at_1.value == pytest.approx(at_1.cox + at_1.orthogonality, abs=1e-12)


def test_combined_validation():
    theta = theta_tensor([0.0, 1.0])
    sb = SurvivalBatch([1.0, 2.0], [1, 1])
    with pytest.raises(ConfigError):
        combined_loss(theta, sb, None, gamma=-0.5)
    with pytest.raises(ConfigError):
        combined_loss(theta, sb, None, gamma=0.5)
