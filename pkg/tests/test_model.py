import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import expit
from scipy.stats import norm

from cheatdetect.model import (ConfigurationError, DataError, DataSet, ModelSpec, ParameterState,
                               deviance, irf_prob, log_likelihood, response_loglik_sums,
                               rt_log_density)
from cheatdetect.rand_dist import LOG_2PI

from conftest import random_data, random_state


def test_irf_examples():
    assert irf_prob(0, 0, 0, 1, 5) == pytest.approx(0.5)
    assert irf_prob(1, 0, 1, 1, 0.904) == pytest.approx(0.87035, abs=1e-5)
    odds = lambda p: p / (1 - p)
    ratio = odds(irf_prob(1, 0, 1, 1, 0.904)) / odds(irf_prob(1, 0, 0, 1, 0.904))
    assert ratio == pytest.approx(np.exp(0.904))
    assert round(ratio, 1) == 2.5


@settings(max_examples=200, deadline=None)
@given(theta=st.floats(-5, 5), beta=st.floats(-5, 5), delta=st.floats(0.01, 5),
       h=st.floats(0.01, 1))
def test_irf_monotone_and_bounded(theta, beta, delta, h):
    p = irf_prob(theta, beta, 1, 1, delta)
    assert 0 < p < 1
    assert irf_prob(theta + h, beta, 1, 1, delta) > p
    assert irf_prob(theta, beta + h, 1, 1, delta) < p
    assert irf_prob(theta, beta, 1, 1, delta + h) > p
    # without the interaction the drift is irrelevant
    assert irf_prob(theta, beta, 0, 1, delta) == expit(theta - beta)
    assert irf_prob(theta, beta, 1, 0, delta) == expit(theta - beta)


def test_rt_density_examples():
    assert rt_log_density(0.4 - 0.1, 0.1, 0.4, 0, 1, 2.0, 1.0) == pytest.approx(-0.5 * LOG_2PI)
    assert rt_log_density(0.0, 0.0, 0.615, 1, 1, 0.615, 1.0) == pytest.approx(-0.5 * LOG_2PI)
    # the cheating shift lowers the mean by exactly gamma
    for lt in (-1.0, 0.0, 0.7):
        shifted = rt_log_density(lt, 0.2, 0.5, 1, 1, 0.615, 0.8)
        base = rt_log_density(lt + 0.615, 0.2, 0.5, 0, 1, 0.615, 0.8)
        assert shifted == pytest.approx(base, abs=1e-14)
    assert rt_log_density(0.3, 0.1, 0.2, 1, 1, 0.5, 0.8) == pytest.approx(
        norm(0.2 - 0.1 - 0.5, np.sqrt(0.8)).logpdf(0.3))


def test_log_likelihood_degenerate_cases():
    st1 = ParameterState.zeros(1, 1)
    st1.xi[:] = 0
    assert log_likelihood(DataSet([[1]]), st1, "M1") == pytest.approx(np.log(0.5))
    st2 = ParameterState.zeros(1, 2)
    assert log_likelihood(DataSet([[1, 0]]), st2, "M1") == pytest.approx(2 * np.log(0.5))
    assert deviance(DataSet([[1]]), st1, "M1") == pytest.approx(1.3863, abs=1e-4)


def _hand_2x2():
    st_ = ParameterState.zeros(2, 2)
    st_.theta = np.array([0.3, -0.2])
    st_.beta = np.array([0.1, 0.4])
    st_.xi = np.array([1, 0], dtype=np.int8)
    st_.eta = np.array([1, 0], dtype=np.int8)
    st_.delta = 1.0
    y = np.array([[1, 0], [0, 1]])
    total = 0.0
    for i in range(2):
        for j in range(2):
            p = 1 / (1 + np.exp(-(st_.theta[i] - st_.beta[j] + st_.xi[i] * st_.eta[j] * 1.0)))
            total += np.log(p) if y[i, j] else np.log(1 - p)
    return DataSet(y), st_, total


def test_log_likelihood_matches_hand_sum():
    data, st_, hand = _hand_2x2()
    assert log_likelihood(data, st_, "M1") == pytest.approx(hand, abs=1e-13)
    assert deviance(data, st_, "M1") == pytest.approx(-2 * hand, abs=1e-12)


def test_deviance_is_minus_twice_loglik(rng):
    data = random_data(7, 5, rng, missing=0.2)
    for spec in ModelSpec:
        s = random_state(7, 5, rng)
        assert deviance(data, s, spec) == -2.0 * log_likelihood(data, s, spec)


def test_joint_loglik_matches_cellwise_oracle(rng):
    data = random_data(6, 4, rng, missing=0.3)
    s = random_state(6, 4, rng)
    y, m = data.responses, data.time_mask
    expected = 0.0
    for i in range(6):
        for j in range(4):
            c = s.xi[i] * s.eta[j]
            p = expit(s.theta[i] - s.beta[j] + s.delta * c)
            expected += np.log(p if y[i, j] else 1 - p)
            if m[i, j]:
                expected += norm(s.alpha[j] - s.tau[i] - s.gamma * c,
                                 np.sqrt(s.kappa)).logpdf(data.log_times[i, j])
    assert log_likelihood(data, s, "M2") == pytest.approx(expected, rel=1e-12)


def test_null_models_drop_their_drift(rng):
    data = random_data(5, 4, rng)
    s = random_state(5, 4, rng)
    a = log_likelihood(data, s, "M1_null")
    s.delta = 3.0
    assert log_likelihood(data, s, "M1_null") == a
    b = log_likelihood(data, s, "M2_null")
    s.gamma = 5.0
    assert log_likelihood(data, s, "M2_null") == b


def test_fully_masked_times_reduce_to_response_model(rng):
    data = random_data(6, 5, rng)
    masked = DataSet(data.responses, data.log_times, np.zeros_like(data.time_mask))
    s = random_state(6, 5, rng)
    assert log_likelihood(masked, s, "M2") == log_likelihood(data.without_times(), s, "M1")


def test_additive_over_disjoint_items(rng):
    data = random_data(5, 6, rng, missing=0.2)
    s = random_state(5, 6, rng)
    left, right = np.arange(3), np.arange(3, 6)

    def part(cols):
        sub = DataSet(data.responses[:, cols], data.log_times[:, cols], data.time_mask[:, cols])
        ps = s.copy()
        ps.beta, ps.alpha, ps.eta = s.beta[cols], s.alpha[cols], s.eta[cols]
        return log_likelihood(sub, ps, "M2")

    assert log_likelihood(data, s, "M2") == pytest.approx(part(left) + part(right), rel=1e-12)


def test_fast_kernel_agrees_with_direct_evaluation(rng):
    y = (rng.random((30, 12)) < 0.5).astype(float)
    theta, beta = rng.normal(0, 2, 30), rng.normal(0, 2, 12)
    cheat = rng.random((30, 12)) < 0.3
    logits = theta[:, None] - beta[None, :] + 1.3 * cheat
    direct = y * logits - np.logaddexp(0, logits)
    for axis in (None, 0, 1):
        np.testing.assert_allclose(response_loglik_sums(y, theta, beta, cheat, 1.3, axis=axis),
                                   direct.sum(axis=axis), rtol=1e-10)
    # extreme logits take the stable path
    big = response_loglik_sums(y, theta * 400, beta, cheat, 1.3)
    lg = theta[:, None] * 400 - beta[None, :] + 1.3 * cheat
    assert big == pytest.approx(np.sum(y * lg - np.logaddexp(0, lg)))


def test_dataset_validation():
    with pytest.raises(DataError, match="row 1, column 0"):
        DataSet([[0, 1], [2, 1]])
    with pytest.raises(DataError):
        DataSet([[0, 1]], np.zeros((2, 2)))
    with pytest.raises(DataError, match="row 0, column 1"):
        DataSet.from_arrays([[0, 1]], [[1.0, 0.0]])
    d = DataSet.from_arrays([[0, 1], [1, 1]], [[1.0, np.nan], [2.0, 3.0]])
    assert d.time_mask.sum() == 3
    assert d.log_times[0, 1] == 0.0
    with pytest.raises(ConfigurationError):
        log_likelihood(d.without_times(), ParameterState.zeros(2, 2), "M2")
    with pytest.raises(ConfigurationError):
        log_likelihood(d, ParameterState.zeros(3, 2), "M2")


def test_model_spec_parsing():
    assert ModelSpec.parse("m2") is ModelSpec.M2
    assert ModelSpec.parse("M1_null") is ModelSpec.M1_NULL
    assert ModelSpec.parse("M10") is ModelSpec.M1_NULL
    assert ModelSpec.parse("m2-null") is ModelSpec.M2_NULL
    assert ModelSpec.M2.null is ModelSpec.M2_NULL
    with pytest.raises(ConfigurationError):
        ModelSpec.parse("M3")
