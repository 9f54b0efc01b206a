"""Synthetic data under M2 and the replication study harness."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from . import decision
from .diagnostics import dic
from .model import DataSet, ModelSpec, ParameterState, cheat_matrix, irf_prob
from .rand_dist import MVNormal2, RngStream
from .sampler import SamplerConfig, data_driven_init, run_chain

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GlobalParams:
    delta: float = 1.2
    gamma: float = 1.2
    kappa: float = 0.801
    pi1: float = 0.10
    pi2: float = 0.25
    mu: tuple = (-0.914, -0.568)
    Sigma: tuple = ((0.287, 0.123), (0.123, 0.270))
    Omega: tuple = ((0.756, 0.104), (0.104, 0.397))

    def as_dict(self) -> dict:
        """Flat names matching :meth:`ParameterState.globals_dict`."""
        s, o = np.asarray(self.Sigma), np.asarray(self.Omega)
        return {"sigma11": s[0, 0], "sigma22": s[1, 1], "sigma12": s[0, 1],
                "omega11": o[0, 0], "omega22": o[1, 1], "omega12": o[0, 1],
                "mu1": self.mu[0], "mu2": self.mu[1], "delta": self.delta,
                "gamma": self.gamma, "kappa": self.kappa, "pi1": self.pi1, "pi2": self.pi2}


def default_globals() -> GlobalParams:
    """Generating values: both drifts 1.2, the rest at the reported M2 posterior means."""
    return GlobalParams()


@dataclass(frozen=True)
class SimSetting:
    name: str
    pi1: float
    pi2: float
    n_persons: int
    n_items: int
    base: GlobalParams = field(default_factory=default_globals)

    @property
    def globals(self) -> GlobalParams:
        return replace(self.base, pi1=self.pi1, pi2=self.pi2)

    def scaled(self, n_persons: int, n_items: int, name: str | None = None) -> "SimSetting":
        return replace(self, n_persons=n_persons, n_items=n_items, name=name or self.name)


SETTINGS = {
    "S1": SimSetting("S1", 0.10, 0.25, 2000, 200),
    "S2": SimSetting("S2", 0.20, 0.50, 2000, 200),
    "S3": SimSetting("S3", 0.10, 0.25, 4000, 400),
    "S4": SimSetting("S4", 0.20, 0.50, 4000, 400),
    "desk": SimSetting("desk", 0.20, 0.50, 500, 100),
}

# iterations / burn-in / replications that go with each preset
PRESET_RUNS = {"S1": (5000, 3000, 50), "S2": (5000, 3000, 50), "S3": (5000, 3000, 50),
               "S4": (5000, 3000, 50), "desk": (2000, 1000, 5)}


@dataclass
class GroundTruth:
    xi_true: np.ndarray
    eta_true: np.ndarray
    state: ParameterState
    setting: SimSetting


def generate_dataset(setting: SimSetting, rng) -> tuple[DataSet, GroundTruth]:
    """Draw one dataset from M2 with the setting's global parameters."""
    gen = rng.generator if isinstance(rng, RngStream) else np.random.default_rng(rng)
    g = setting.globals
    n, j = setting.n_persons, setting.n_items
    st = ParameterState.zeros(n, j)
    st.delta, st.gamma, st.kappa, st.pi1, st.pi2 = g.delta, g.gamma, g.kappa, g.pi1, g.pi2
    st.mu = np.array(g.mu, dtype=float)
    st.Sigma = np.array(g.Sigma, dtype=float)
    st.Omega = np.array(g.Omega, dtype=float)
    person = MVNormal2((0.0, 0.0), g.Sigma).sample(gen, size=n)
    item = MVNormal2(tuple(g.mu), g.Omega).sample(gen, size=j)
    st.theta, st.tau = person[:, 0].copy(), person[:, 1].copy()
    st.beta, st.alpha = item[:, 0].copy(), item[:, 1].copy()
    st.xi = (gen.random(n) < g.pi1).astype(np.int8)
    st.eta = (gen.random(j) < g.pi2).astype(np.int8)
    p = irf_prob(st.theta[:, None], st.beta[None, :], st.xi[:, None], st.eta[None, :], g.delta)
    y = (gen.random((n, j)) < p).astype(np.int8)
    mean = st.alpha[None, :] - st.tau[:, None] - g.gamma * cheat_matrix(st)
    log_t = mean + np.sqrt(g.kappa) * gen.standard_normal((n, j))
    return DataSet(y, log_t), GroundTruth(st.xi.copy(), st.eta.copy(), st, setting)


def auc(scores, labels) -> float:
    """Probability that a random positive outscores a random negative (ties count 1/2)."""
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels).astype(bool).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def _safe_auc(scores, labels):
    try:
        return auc(scores, labels)
    except ValueError:
        return float("nan")


@dataclass
class StudyReport:
    records: list
    summary: dict
    config: dict


def _initial_state(init, data, spec, truth):
    if init == "prior":
        return None
    if init == "data":
        return data_driven_init(data, spec)
    if init == "truth":
        return truth.state.copy()
    raise ValueError(f"unknown init mode {init!r}")


def fit_replicate(data, truth, models, config, levels, stream, init="prior", compare_null=False):
    """Fit each model to one dataset and score it against the truth."""
    rec = {"pi1_realized": float(truth.xi_true.mean()), "pi2_realized": float(truth.eta_true.mean()),
           "auc_total_score": _safe_auc(data.responses.sum(axis=1), truth.xi_true)}
    true_globals = truth.setting.globals.as_dict()
    for k, model in enumerate(models):
        spec = ModelSpec.parse(model)
        d = data if spec.uses_times else data.without_times()
        t0 = time.perf_counter()
        chain = run_chain(d, spec, config, init=_initial_state(init, d, spec, truth),
                          rng=stream.spawn(10 + k))
        pre = spec.value
        rec[f"{pre}.seconds"] = time.perf_counter() - t0
        p_xi = decision.indicator_posterior_means(chain, "person")
        p_eta = decision.indicator_posterior_means(chain, "item")
        rec[f"{pre}.auc_xi"] = _safe_auc(p_xi, truth.xi_true)
        rec[f"{pre}.auc_eta"] = _safe_auc(p_eta, truth.eta_true)
        for rho in levels:
            dp = decision.optimal_threshold_fdr(p_xi, rho, truth.xi_true)
            di = decision.optimal_threshold_fnr(p_eta, rho, truth.eta_true)
            rec[f"{pre}.fdp_persons@{rho:g}"] = decision.false_discovery_proportion(dp.flags, truth.xi_true)
            rec[f"{pre}.n_persons_flagged@{rho:g}"] = dp.n_flagged
            rec[f"{pre}.fnp_items@{rho:g}"] = decision.false_nondiscovery_proportion(di.flags, truth.eta_true)
            rec[f"{pre}.n_items_flagged@{rho:g}"] = di.n_flagged
        for name, draws in chain.global_draws().items():
            rec[f"{pre}.mean_{name}"] = float(draws.mean())
            rec[f"{pre}.bias_{name}"] = float(draws.mean() - true_globals[name])
        if compare_null:
            null = spec.null
            null_chain = run_chain(d, null, config, init=_initial_state(init, d, null, truth),
                                   rng=stream.spawn(20 + k))
            rec[f"{pre}.dic"] = dic(d, spec, chain).dic
            rec[f"{pre}.dic_null"] = dic(d, null, null_chain).dic
    return rec


def summarize(records) -> dict:
    keys = sorted({k for r in records for k, v in r.items() if k != "rep"
                   and isinstance(v, (int, float)) and not isinstance(v, bool)})
    out = {}
    for k in keys:
        vals = np.array([r[k] for r in records if k in r], dtype=float)
        vals = vals[np.isfinite(vals)]
        if vals.size == 0:
            continue
        out[k] = {"mean": float(vals.mean()), "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
                  "q05": float(np.quantile(vals, 0.05)), "median": float(np.median(vals)),
                  "q95": float(np.quantile(vals, 0.95)), "n": int(vals.size)}
    return out


def run_study(settings, n_reps: int, config: SamplerConfig | None = None,
              levels=(0.01, 0.05, 0.10), models=("M1", "M2"), init: str = "prior",
              compare_null: bool = False, seed: int = 0, progress=None) -> StudyReport:
    """Generate, fit and score ``n_reps`` datasets for each setting.

    A failing replication is recorded with an ``error`` entry and the study
    continues.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    if isinstance(settings, (SimSetting, str)):
        settings = [settings]
    settings = [SETTINGS[s] if isinstance(s, str) else s for s in settings]
    config = config or SamplerConfig()
    root = RngStream(seed)
    records = []
    for si, setting in enumerate(settings):
        for rep in range(n_reps):
            stream = root.spawn(si).spawn(rep)
            rec = {"setting": setting.name, "rep": rep}
            try:
                data, truth = generate_dataset(setting, stream.spawn(0))
                rec.update(fit_replicate(data, truth, models, config, levels, stream,
                                         init=init, compare_null=compare_null))
            except Exception as exc:  # noqa: BLE001 - keep the study going
                log.exception("replication %s/%d failed", setting.name, rep)
                rec["error"] = f"{type(exc).__name__}: {exc}"
            records.append(rec)
            if progress is not None:
                progress(rec)
    cfg = {"settings": [s.name for s in settings], "n_reps": n_reps, "levels": list(levels),
           "models": list(models), "init": init, "compare_null": compare_null, "seed": seed,
           "burn_in": config.burn_in, "n_iter": config.n_iter}
    by_setting = {s.name: summarize([r for r in records if r["setting"] == s.name]) for s in settings}
    return StudyReport(records=records, summary=by_setting, config=cfg)
