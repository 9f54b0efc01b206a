"""Multi-chain fitting, convergence filtering and posterior reporting."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import decision
from .diagnostics import dic, gelman_rubin, split_rhat
from .model import ConfigurationError, DataSet, ModelSpec
from .priors import HyperConfig
from .rand_dist import RngStream
from .sampler import ChainOutput, SamplerConfig, data_driven_init, run_chain

log = logging.getLogger(__name__)


def _chain_task(args):
    data, spec, config, init, seed, k, hyper = args
    start = data_driven_init(data, spec) if init == "data" else (None if init == "prior" else init)
    return run_chain(data, spec, config, init=start, rng=RngStream(seed).spawn(k), hyper=hyper)


def run_chains(data: DataSet, spec, config: SamplerConfig, n_chains: int = 1, seed: int = 0,
               init="prior", hyper: HyperConfig | None = None, n_jobs: int = 1) -> list:
    """Run independent chains; chain ``k`` uses substream ``k`` of ``seed``.

    Results do not depend on ``n_jobs``.
    """
    spec = ModelSpec.parse(spec)
    if n_chains < 1:
        raise ConfigurationError("n_chains must be at least 1")
    data.check_spec(spec)
    tasks = [(data, spec, config, init, seed, k, hyper) for k in range(n_chains)]
    if n_jobs == 1 or n_chains == 1:
        return [_chain_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(_chain_task, tasks))


def assess_chains(chains, threshold: float = 1.1) -> list:
    """Per-chain convergence summary.

    A chain counts as converged when its split R-hat is below ``threshold``
    and its deviance mixes (R-hat below ``threshold``) with the chain whose
    mean deviance is lowest.
    """
    post = [c.post_deviance for c in chains]
    best = int(np.argmin([p.mean() for p in post]))
    rows = []
    for k, (c, p) in enumerate(zip(chains, post)):
        row = {"chain": k, "seed": c.seed, "stream_path": list(c.stream_path),
               "mean_deviance": float(p.mean()), "acceptance": c.acceptance}
        row["split_rhat"] = split_rhat(p, threshold=threshold).r_hat if len(p) >= 4 else float("nan")
        if k != best and len(p) >= 2:
            row["rhat_vs_best"] = gelman_rubin([post[best], p], threshold).r_hat
        else:
            row["rhat_vs_best"] = 1.0
        ok_split = not np.isfinite(row["split_rhat"]) or row["split_rhat"] < threshold
        row["converged"] = bool(ok_split and row["rhat_vs_best"] < threshold)
        rows.append(row)
    return rows


def credible_summary(draws: np.ndarray) -> dict:
    lo, hi = np.quantile(draws, [0.025, 0.975])
    return {"mean": float(np.mean(draws)), "ci_low": float(lo), "ci_high": float(hi)}


def posterior_summary(chains) -> dict:
    """Posterior means, 95% equal-tailed intervals and indicator probabilities."""
    chains = list(chains)
    if not chains:
        raise ValueError("no chains to summarise")
    spec = chains[0].spec
    pooled = {}
    for c in chains:
        for name, d in c.global_draws().items():
            pooled.setdefault(name, []).append(d)
    globals_ = {name: credible_summary(np.concatenate(v)) for name, v in pooled.items()}
    if spec.uses_times:
        # derived quantities are summarised draw by draw, like the rest
        d = {name: np.concatenate(v) for name, v in pooled.items()}
        globals_["rho_person"] = credible_summary(d["sigma12"] / np.sqrt(d["sigma11"] * d["sigma22"]))
        globals_["rho_item"] = credible_summary(d["omega12"] / np.sqrt(d["omega11"] * d["omega22"]))
        globals_["kappa_sd"] = credible_summary(np.sqrt(d["kappa"]))
    return {"model": spec.value, "n_draws": int(sum(c.n_draws for c in chains)),
            "globals": globals_,
            "person_probs": decision.indicator_posterior_means(chains, "person"),
            "item_probs": decision.indicator_posterior_means(chains, "item")}


def make_decisions(person_probs, item_probs, levels, costs=()) -> dict:
    """FDR-controlled rules for persons, FNR-controlled rules for items, and Bayes rules."""
    out = {"persons": {}, "items": {}, "bayes_persons": {}, "bayes_items": {}}
    for rho in levels:
        out["persons"][f"{rho:g}"] = decision.optimal_threshold_fdr(person_probs, rho).to_dict()
        out["items"][f"{rho:g}"] = decision.optimal_threshold_fnr(item_probs, rho).to_dict()
    for cost in costs:
        out["bayes_persons"][f"{cost:g}"] = np.flatnonzero(decision.bayes_decision(person_probs, cost)).tolist()
        out["bayes_items"][f"{cost:g}"] = np.flatnonzero(decision.bayes_decision(item_probs, cost)).tolist()
    return out


def analyze(data: DataSet, spec, config: SamplerConfig, n_chains: int = 1, seed: int = 0,
            init="prior", levels=(0.01, 0.05, 0.10), costs=(), rhat_threshold: float = 1.1,
            compare_null: bool = True, force: bool = False, hyper: HyperConfig | None = None,
            n_jobs: int = 1) -> tuple[dict, list, list]:
    """Fit ``spec`` (and optionally its null model) and assemble the analysis report.

    Returns ``(report, chains, null_chains)``.  Only converged chains are pooled.
    When no chain converges the report carries ``converged = False`` and, unless
    ``force`` is set, no decisions.
    """
    spec = ModelSpec.parse(spec)
    if spec.uses_times:
        data.check_spec(spec)
    else:
        data = data.without_times()
    chains = run_chains(data, spec, config, n_chains, seed, init, hyper, n_jobs)
    conv = assess_chains(chains, rhat_threshold)
    keep = [c for c, row in zip(chains, conv) if row["converged"]]
    converged = bool(keep)
    pool = keep if keep else chains
    report = {"model": spec.value, "n_persons": data.n_persons, "n_items": data.n_items,
              "seed": seed, "n_chains": n_chains, "burn_in": config.burn_in, "n_iter": config.n_iter,
              "rhat_threshold": rhat_threshold, "converged": converged, "chains": conv,
              "pooled_chains": [row["chain"] for row in conv if row["converged"]]}
    if n_chains >= 2:
        report["rhat_all_chains"] = gelman_rubin([c.post_deviance for c in chains], rhat_threshold).to_dict()
    summary = posterior_summary(pool)
    report["globals"] = summary["globals"]
    report["person_probs"] = summary["person_probs"].tolist()
    report["item_probs"] = summary["item_probs"].tolist()
    if converged or force:
        report["decisions"] = make_decisions(summary["person_probs"], summary["item_probs"], levels, costs)
    else:
        log.warning("no chain converged; decisions withheld (use force to override)")
    null_chains = []
    if compare_null:
        report["dic"] = {spec.value: dic(data, spec, pool).to_dict()}
        null = spec.null
        null_chains = run_chains(data, null, config, n_chains, seed, init, hyper, n_jobs)
        null_conv = assess_chains(null_chains, rhat_threshold)
        null_pool = [c for c, r in zip(null_chains, null_conv) if r["converged"]] or null_chains
        report["dic"][null.value] = dic(data, null, null_pool).to_dict()
        report["dic"]["preferred"] = min((spec.value, null.value), key=lambda m: report["dic"][m]["dic"])
    return report, chains, null_chains
