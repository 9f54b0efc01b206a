import numpy as np
import pytest

from cheatdetect.diagnostics import dic, gelman_rubin, split_rhat
from cheatdetect.model import DataSet, ModelSpec, deviance
from cheatdetect.rand_dist import RngStream
from cheatdetect.sampler import ChainOutput, SamplerConfig, run_chain


def chain_from_thetas(thetas, n_items=1, beta=0.0):
    """Hand-made M1 chain whose only moving parameter is the first ability."""
    k = len(thetas)
    z = lambda *shape: np.zeros((k,) + shape)
    sig = np.tile(np.eye(2), (k, 1, 1))
    return ChainOutput(spec=ModelSpec.M1, theta=np.asarray(thetas, float).reshape(k, 1),
                       xi=np.zeros((k, 1), np.int8), tau=z(1), beta=np.full((k, n_items), beta),
                       eta=np.zeros((k, n_items), np.int8), alpha=z(n_items), delta=np.ones(k),
                       gamma=np.ones(k), kappa=np.ones(k), pi1=np.full(k, 0.5), pi2=np.full(k, 0.5),
                       mu=z(2), Sigma=sig, Omega=sig.copy(), deviance=np.zeros(k), burn_in=0)


def test_constant_chains_at_different_levels():
    assert gelman_rubin([[0, 0, 0, 0], [1, 1, 1, 1]]).r_hat == np.inf


def test_identical_chains():
    x = np.random.default_rng(0).normal(size=50)
    assert gelman_rubin([x, x]).r_hat == pytest.approx(np.sqrt(49 / 50))


def test_independent_normal_chains():
    gen = np.random.default_rng(1)
    rep = gelman_rubin(gen.normal(size=(2, 10_000)))
    assert 0.99 <= rep.r_hat <= 1.02 and rep.converged
    assert rep.r_hat < 1.05


def test_affine_invariance():
    gen = np.random.default_rng(2)
    x = gen.normal(size=(3, 200)) + np.array([[0.0], [0.3], [-0.2]])
    assert gelman_rubin(3.7 * x - 11.0).r_hat == pytest.approx(gelman_rubin(x).r_hat, rel=1e-12)


def test_split_rhat_flags_trend():
    trend = np.linspace(0, 10, 400) + np.random.default_rng(3).normal(size=400)
    assert split_rhat(trend).r_hat > 1.1
    assert split_rhat(np.random.default_rng(4).normal(size=400)).r_hat < 1.1
    with pytest.raises(ValueError):
        gelman_rubin([[1.0, 2.0]])


def test_dic_identical_draws():
    data = DataSet([[1, 0]])
    ch = chain_from_thetas([0.3] * 5, n_items=2)
    ch.deviance[:] = deviance(data, ch.state_at(0), ModelSpec.M1)
    rep = dic(data, "M1", ch)
    assert rep.p_d == pytest.approx(0.0, abs=1e-12)
    assert rep.dic == pytest.approx(rep.dhat)


def test_dic_two_draw_hand_calculation():
    data = DataSet([[1]])
    thetas = np.log([0.4 / 0.6, 0.6 / 0.4])
    ch = chain_from_thetas(thetas)
    ch.deviance[:] = [deviance(data, ch.state_at(k), ModelSpec.M1) for k in range(2)]
    dbar = 0.5 * (-2 * np.log(0.4) - 2 * np.log(0.6))
    dhat = -2 * np.log(0.5)
    rep = dic(data, "M1", ch)
    assert rep.dbar == pytest.approx(dbar)
    assert rep.dhat == pytest.approx(dhat)
    assert rep.dic == pytest.approx(2 * dbar - dhat)
    assert rep.dic == rep.dbar + rep.p_d


def test_dic_identity_on_real_chain(rng):
    y = (rng.random((10, 6)) < 0.5).astype(int)
    ch = run_chain(DataSet(y), "M1", SamplerConfig(burn_in=20, n_iter=80), rng=RngStream(1))
    rep = dic(DataSet(y), "M1", ch)
    assert rep.dic == rep.dbar + rep.p_d
    assert rep.dbar == pytest.approx(ch.post_deviance.mean())
    with pytest.raises(ValueError):
        dic(DataSet(y), "M1", [])
