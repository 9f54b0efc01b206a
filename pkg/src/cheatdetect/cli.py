"""Command-line interface: ``cheatdetect {fit,simulate,decide,diagnose}``.

Settings come from an optional JSON file (``--config``); command-line flags
override it.  The default output directory is taken from the environment
variable ``CHEATDETECT_OUTPUT_DIR``.  Ingestion and configuration problems
exit with status 2.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import fileio
from .analysis import assess_chains, make_decisions, posterior_summary
from .diagnostics import dic, gelman_rubin
from .model import ConfigurationError, DataError, ModelSpec
from .sampler import SamplerConfig
from .simulation import PRESET_RUNS, SETTINGS, generate_dataset, run_study
from .rand_dist import RngStream

log = logging.getLogger("cheatdetect")

EXIT_USAGE = 2


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p):
    p.add_argument("--config", help="JSON file with settings (flags override it)")
    p.add_argument("--out", dest="output_dir", help="output directory "
                   f"(default: ${fileio.OUTPUT_DIR_ENV} or ./cheatdetect-out)")
    p.add_argument("--overwrite", action="store_true", help="allow writing into a non-empty directory")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cheatdetect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a model to response (and time) data")
    _common(f)
    f.add_argument("--responses", help="CSV of 0/1 responses, persons in rows")
    f.add_argument("--times", help="CSV of response times in seconds, empty cells missing")
    f.add_argument("--model", help="M1, M1_null, M2 or M2_null")
    f.add_argument("--chains", type=int)
    f.add_argument("--n-iter", type=int)
    f.add_argument("--burn-in", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--init", choices=("data", "prior"))
    f.add_argument("--levels", type=_floats, help="comma-separated decision levels")
    f.add_argument("--costs", type=_floats, help="comma-separated Bayes-rule costs")
    f.add_argument("--rhat-threshold", type=float)
    f.add_argument("--no-null", dest="compare_null", action="store_false", default=None,
                   help="skip fitting the null model for DIC")
    f.add_argument("--force", action="store_true", default=None,
                   help="emit decisions even if no chain converged")
    f.add_argument("--jobs", dest="n_jobs", type=int, help="parallel chain processes")

    s = sub.add_parser("simulate", help="run a simulation study")
    _common(s)
    s.add_argument("--preset", default=None, choices=sorted(SETTINGS))
    s.add_argument("--reps", type=int)
    s.add_argument("--n-iter", type=int)
    s.add_argument("--burn-in", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--init", choices=("prior", "data", "truth"))
    s.add_argument("--levels", type=_floats)
    s.add_argument("--models", help="comma-separated models to fit (default M1,M2)")
    s.add_argument("--compare-null", action="store_true", default=None)
    s.add_argument("--generate-only", action="store_true",
                   help="write the simulated data sets without fitting")

    d = sub.add_parser("decide", help="re-threshold stored posterior probabilities")
    _common(d)
    d.add_argument("--from", dest="source", required=True, help="fit output folder or report.json")
    d.add_argument("--levels", type=_floats)
    d.add_argument("--costs", type=_floats)

    g = sub.add_parser("diagnose", help="R-hat and DIC for stored chains")
    _common(g)
    g.add_argument("--chains-dir", required=True, help="folder written by save_chains")
    g.add_argument("--responses", help="responses CSV (needed for DIC)")
    g.add_argument("--times", help="times CSV (needed for DIC of joint models)")
    g.add_argument("--rhat-threshold", type=float)
    return parser


def _settings(args, keys) -> dict:
    """Config-file values overridden by any flags that were given."""
    cfg = fileio.read_config(args.config) if args.config else {}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _emit(msg):
    print(msg, file=sys.stdout)


def cmd_fit(args) -> int:
    from .analysis import analyze

    cfg = fileio.RunConfig.from_dict(_settings(args, [
        "responses", "times", "model", "chains", "n_iter", "burn_in", "seed", "init", "levels",
        "costs", "rhat_threshold", "compare_null", "force", "n_jobs", "output_dir"]))
    if not cfg.responses:
        raise ConfigurationError("no responses file given (--responses or config 'responses')")
    if cfg.spec.uses_times and not cfg.times:
        raise ConfigurationError(f"model {cfg.model} needs a times file")
    data = fileio.load_dataset(cfg.responses, cfg.times if cfg.spec.uses_times else None)
    out = fileio.prepare_output_dir(fileio.resolve_output_dir(cfg.output_dir), args.overwrite)
    report, chains, null_chains = analyze(
        data, cfg.spec, cfg.sampler, n_chains=cfg.chains, seed=cfg.seed, init=cfg.init,
        levels=cfg.levels, costs=cfg.costs, rhat_threshold=cfg.rhat_threshold,
        compare_null=cfg.compare_null, force=cfg.force, n_jobs=cfg.n_jobs)
    config = cfg.to_dict()
    config.pop("output_dir")
    report["config"] = config
    fileio.write_analysis(report, chains, out, null_chains)
    _emit(f"model {report['model']}: {sum(r['converged'] for r in report['chains'])}/"
          f"{len(report['chains'])} chains converged")
    for level, d in report.get("decisions", {}).get("persons", {}).items():
        _emit(f"  persons flagged at local FDR {level}: {d['n_flagged']}")
    for level, d in report.get("decisions", {}).get("items", {}).items():
        _emit(f"  items flagged at local FNR {level}: {d['n_flagged']}")
    if "dic" in report:
        _emit(f"  DIC preferred model: {report['dic']['preferred']}")
    _emit(f"wrote {out}")
    return 0 if report["converged"] or cfg.force else 1


def cmd_simulate(args) -> int:
    cfg = _settings(args, ["preset", "reps", "n_iter", "burn_in", "seed", "init", "levels",
                           "models", "compare_null", "output_dir"])
    known = {"preset", "reps", "n_iter", "burn_in", "seed", "init", "levels", "models",
             "compare_null", "output_dir"}
    if set(cfg) - known:
        raise ConfigurationError(f"unknown configuration keys {sorted(set(cfg) - known)}")
    preset = cfg.get("preset", "desk")
    if preset not in SETTINGS:
        raise ConfigurationError(f"unknown preset {preset!r}")
    n_iter, burn_in, reps = PRESET_RUNS[preset]
    reps = int(cfg.get("reps", reps))
    if reps < 1:
        raise ConfigurationError("reps must be at least 1")
    seed = int(cfg.get("seed", 0))
    out = fileio.prepare_output_dir(fileio.resolve_output_dir(cfg.get("output_dir")), args.overwrite)
    setting = SETTINGS[preset]
    if args.generate_only:
        root = RngStream(seed)
        for rep in range(reps):
            data, truth = generate_dataset(setting, root.spawn(0).spawn(rep).spawn(0))
            fileio.write_dataset(data, out / f"responses_{rep}.csv", out / f"times_{rep}.csv")
            fileio.write_table(out / f"truth_persons_{rep}.csv",
                               [{"person": i, "xi": int(v)} for i, v in enumerate(truth.xi_true)])
            fileio.write_table(out / f"truth_items_{rep}.csv",
                               [{"item": j, "eta": int(v)} for j, v in enumerate(truth.eta_true)])
            _emit(f"replication {rep}: {data.n_persons} x {data.n_items} data set")
        return 0
    models = cfg.get("models", "M1,M2")
    models = models.split(",") if isinstance(models, str) else list(models)
    try:
        models = [ModelSpec.parse(m).value for m in models]
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    config = SamplerConfig(burn_in=int(cfg.get("burn_in", burn_in)), n_iter=int(cfg.get("n_iter", n_iter)))
    levels = cfg.get("levels", [0.01, 0.05, 0.10])
    study = run_study([setting], reps, config, levels=levels, models=models,
                      init=cfg.get("init", "data"), compare_null=bool(cfg.get("compare_null", False)),
                      seed=seed, progress=lambda r: _emit(f"replication {r['rep']} done"
                                                          + (f" ({r['error']})" if "error" in r else "")))
    fileio.write_study(study, out)
    _emit(f"wrote {out}")
    return 0 if not any("error" in r for r in study.records) else 1


def cmd_decide(args) -> int:
    cfg = _settings(args, ["levels", "costs", "output_dir"])
    levels = cfg.get("levels", [0.01, 0.05, 0.10])
    costs = cfg.get("costs", [])
    for v in list(levels) + list(costs):
        if not 0 < float(v) < 1:
            raise ConfigurationError(f"level/cost {v} outside (0, 1)")
    person, item = fileio.read_probabilities(args.source)
    out = fileio.prepare_output_dir(fileio.resolve_output_dir(cfg.get("output_dir")), args.overwrite)
    decisions = make_decisions(person, item, levels, costs)
    fileio.write_json(out / "decisions.json", decisions)
    fileio.write_detections(out / "detections.csv", decisions)
    for level, d in decisions["persons"].items():
        _emit(f"persons flagged at local FDR {level}: {d['n_flagged']}")
    for level, d in decisions["items"].items():
        _emit(f"items flagged at local FNR {level}: {d['n_flagged']}")
    return 0


def cmd_diagnose(args) -> int:
    cfg = _settings(args, ["rhat_threshold", "output_dir"])
    thr = float(cfg.get("rhat_threshold", 1.1))
    chains, manifest = fileio.load_chains(args.chains_dir)
    if not chains:
        raise DataError(f"{args.chains_dir}: manifest lists no chains")
    out = fileio.prepare_output_dir(fileio.resolve_output_dir(cfg.get("output_dir")), args.overwrite)
    rows = assess_chains(chains, thr)
    result = {"model": chains[0].spec.value, "chains": rows}
    lengths = {c.n_draws for c in chains}
    if len(chains) >= 2 and len(lengths) == 1:
        result["rhat_all_chains"] = gelman_rubin([c.post_deviance for c in chains], thr).to_dict()
    pool = [c for c, r in zip(chains, rows) if r["converged"]] or chains
    result["globals"] = posterior_summary(pool)["globals"]
    if args.responses:
        spec = chains[0].spec
        data = fileio.load_dataset(args.responses, args.times if spec.uses_times else None)
        result["dic"] = dic(data, spec, pool).to_dict()
    fileio.write_json(out / "diagnostics.json", result)
    for r in rows:
        _emit(f"chain {r['chain']}: split R-hat {r['split_rhat']:.3f}, "
              f"R-hat vs best {r['rhat_vs_best']:.3f}, converged={r['converged']}")
    if "dic" in result:
        _emit(f"DIC {result['dic']['dic']:.1f} (pD {result['dic']['p_d']:.1f})")
    return 0


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "decide": cmd_decide, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (DataError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
