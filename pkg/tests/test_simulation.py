import numpy as np
import pytest
from scipy.special import expit

from cheatdetect.decision import (false_discovery_proportion, indicator_posterior_means,
                                  optimal_threshold_fdr)
from cheatdetect.rand_dist import RngStream, is_spd2
from cheatdetect.sampler import SamplerConfig, run_chain
from cheatdetect.simulation import (SETTINGS, SimSetting, auc, default_globals, generate_dataset,
                                    run_study)


def test_default_globals():
    g = default_globals()
    assert g.delta == 1.2 and g.gamma == 1.2
    d = g.as_dict()
    assert (d["sigma11"], d["sigma22"], d["sigma12"]) == (0.287, 0.270, 0.123)
    assert (d["omega11"], d["omega22"], d["omega12"]) == (0.756, 0.397, 0.104)
    assert (d["mu1"], d["mu2"], d["kappa"]) == (-0.914, -0.568, 0.801)
    assert d["sigma12"] / np.sqrt(d["sigma11"] * d["sigma22"]) == pytest.approx(0.442, abs=5e-4)
    for m in (g.Sigma, g.Omega):
        assert is_spd2(np.array(m)) and np.all(np.linalg.eigvalsh(np.array(m)) > 0)


def test_settings_table():
    expect = {"S1": (0.1, 0.25, 2000, 200), "S2": (0.2, 0.5, 2000, 200),
              "S3": (0.1, 0.25, 4000, 400), "S4": (0.2, 0.5, 4000, 400)}
    for name, row in expect.items():
        s = SETTINGS[name]
        assert (s.pi1, s.pi2, s.n_persons, s.n_items) == row


def test_s1_dimensions():
    data, truth = generate_dataset(SETTINGS["S1"], RngStream(0))
    assert data.responses.shape == (2000, 200) and data.log_times.shape == (2000, 200)
    assert truth.xi_true.shape == (2000,) and truth.eta_true.shape == (200,)
    assert np.all(data.time_mask)


def test_no_cheaters_matches_rasch_cells():
    setting = SimSetting("none", 0.0, 0.5, 3000, 30)
    data, truth = generate_dataset(setting, RngStream(1))
    assert truth.xi_true.sum() == 0
    st = truth.state
    p = expit(st.theta[:, None] - st.beta[None, :])
    # column totals against their binomial expectation
    z = (data.responses.sum(0) - p.sum(0)) / np.sqrt((p * (1 - p)).sum(0))
    assert np.all(np.abs(z) < 4.5)
    assert abs(z.mean()) < 4.5 / np.sqrt(len(z))


def test_cheating_cells_are_faster_by_gamma():
    setting = SimSetting("fast", 0.3, 0.5, 4000, 40)
    data, truth = generate_dataset(setting, RngStream(2))
    st = truth.state
    resid = data.log_times - (st.alpha[None, :] - st.tau[:, None])
    cell = truth.xi_true[:, None] * truth.eta_true[None, :] == 1
    contrast = resid[~cell].mean() - resid[cell].mean()
    assert contrast == pytest.approx(1.2, abs=0.03)


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.5, 0.5], [1, 0]) == 0.5
    assert auc([0.2, 0.8, 0.5], [0, 1, 0]) == 1.0
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_pairwise_count(rng):
    s = rng.integers(0, 5, 40).astype(float)
    y = rng.integers(0, 2, 40)
    y[:2] = [0, 1]
    pos, neg = s[y == 1], s[y == 0]
    pairs = (pos[:, None] > neg[None, :]) + 0.5 * (pos[:, None] == neg[None, :])
    assert auc(s, y) == pytest.approx(pairs.mean(), abs=1e-12)


def test_run_study_smoke():
    tiny = SETTINGS["S2"].scaled(50, 20, "tiny")
    rep = run_study(tiny, 1, SamplerConfig(burn_in=30, n_iter=60), levels=(0.05,),
                    init="data", compare_null=True, seed=3)
    rec = rep.records[0]
    assert "error" not in rec
    for model in ("M1", "M2"):
        for key in ("auc_xi", "auc_eta", "fdp_persons@0.05", "fnp_items@0.05", "bias_delta",
                    "bias_pi1", "dic", "dic_null"):
            assert np.isfinite(rec[f"{model}.{key}"]) or key.startswith("auc")
    assert "M2.bias_gamma" in rec and "M1.bias_gamma" not in rec
    assert rep.summary["tiny"]["M2.bias_delta"]["n"] == 1
    with pytest.raises(ValueError):
        run_study(tiny, 0)


def test_run_study_records_failures(monkeypatch):
    import cheatdetect.simulation as sim

    def boom(*a, **k):
        raise FloatingPointError("bad draw")
    monkeypatch.setattr(sim, "run_chain", boom)
    rep = run_study(SETTINGS["S2"].scaled(20, 10, "t"), 2, SamplerConfig(burn_in=2, n_iter=4))
    assert len(rep.records) == 2 and all("FloatingPointError" in r["error"] for r in rep.records)


def test_fdp_controlled_with_calibrated_probabilities():
    # probabilities that are calibrated and well separated; labels drawn from them
    gen = np.random.default_rng(5)
    fdp = []
    for _ in range(200):
        p = np.where(gen.random(300) < 0.2, gen.beta(8, 1, 300), gen.beta(1, 8, 300))
        truth = (gen.random(300) < p).astype(int)
        r = optimal_threshold_fdr(p, 0.10)
        fdp.append(false_discovery_proportion(r.flags, truth))
    assert np.mean(fdp) <= 0.15


@pytest.mark.slow
def test_true_globals_make_cheaters_detectable():
    setting = SETTINGS["S2"].scaled(200, 40, "detect")
    data, truth = generate_dataset(setting, RngStream(6))
    fixed = ("delta", "gamma", "kappa", "pi1", "pi2", "mu", "Sigma", "Omega")
    cfg = SamplerConfig(burn_in=200, n_iter=400, fixed_blocks=fixed)
    chain = run_chain(data, "M2", cfg, init=truth.state.copy(), rng=RngStream(7))
    assert auc(indicator_posterior_means(chain, "person"), truth.xi_true) > 0.8
    assert auc(indicator_posterior_means(chain, "item"), truth.eta_true) > 0.8
