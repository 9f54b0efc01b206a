"""Data ingestion, run configuration, chain persistence and report files.

Everything written here is deterministic for fixed inputs: no timestamps,
sorted JSON keys, and ``.npy`` columns rather than zip archives.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import ConfigurationError, DataError, DataSet, ModelSpec
from .sampler import ChainOutput, SamplerConfig

CHAIN_FORMAT = "cheatdetect-chains"
CHAIN_FORMAT_VERSION = 1
OUTPUT_DIR_ENV = "CHEATDETECT_OUTPUT_DIR"


class IngestionError(DataError):
    """A data file could not be parsed into a valid data set."""


# ---------------------------------------------------------------- ingestion

def _read_rows(path) -> tuple[list, int]:
    """Rows of a CSV file and the file line number of the first data row."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh)]
    while rows and not any(rows[-1]):
        rows.pop()
    if not rows:
        raise IngestionError(f"{path}: file is empty")
    first = 1

    def numeric(cell):
        if cell == "":
            return True
        try:
            float(cell)
            return True
        except ValueError:
            return False

    if not all(numeric(c) for c in rows[0]):
        rows, first = rows[1:], 2
    if not rows:
        raise IngestionError(f"{path}: header row but no data")
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise IngestionError(f"{path}: line {k + first} has {len(r)} columns, expected {width}")
    return rows, first


def read_responses(path) -> np.ndarray:
    rows, first = _read_rows(path)
    y = np.empty((len(rows), len(rows[0])), dtype=np.int8)
    for i, r in enumerate(rows):
        for j, cell in enumerate(r):
            if cell not in ("0", "1", "0.0", "1.0"):
                raise IngestionError(f"{path}: line {i + first}, column {j + 1}: "
                                     f"response {cell!r} is not 0 or 1")
            y[i, j] = int(float(cell))
    return y


def read_times(path) -> np.ndarray:
    """Times in seconds; empty cells become NaN (missing)."""
    rows, first = _read_rows(path)
    t = np.full((len(rows), len(rows[0])), np.nan)
    for i, r in enumerate(rows):
        for j, cell in enumerate(r):
            if cell == "":
                continue
            try:
                v = float(cell)
            except ValueError:
                raise IngestionError(f"{path}: line {i + first}, column {j + 1}: "
                                     f"time {cell!r} is not a number") from None
            if not (v > 0 and math.isfinite(v)):
                raise IngestionError(f"{path}: line {i + first}, column {j + 1}: "
                                     f"time {cell!r} must be positive")
            t[i, j] = v
    return t


def load_dataset(responses_path, times_path=None) -> DataSet:
    """Read a 0/1 response matrix and optional response times (seconds) from CSV."""
    y = read_responses(responses_path)
    if times_path is None:
        return DataSet(y)
    t = read_times(times_path)
    if t.shape != y.shape:
        raise IngestionError(f"{times_path}: shape {t.shape} does not match responses {y.shape}")
    try:
        return DataSet.from_arrays(y, t)
    except DataError as exc:
        raise IngestionError(str(exc)) from exc


def write_dataset(data: DataSet, responses_path, times_path=None) -> None:
    """Inverse of :func:`load_dataset` (times written in seconds, missing as empty)."""
    with open(responses_path, "w", newline="") as fh:
        csv.writer(fh).writerows(data.responses.tolist())
    if times_path is not None and data.has_times:
        t = np.exp(data.log_times)
        with open(times_path, "w", newline="") as fh:
            w = csv.writer(fh)
            for row, mrow in zip(t, data.time_mask):
                w.writerow([repr(float(v)) if m else "" for v, m in zip(row, mrow)])


# ------------------------------------------------------------ configuration

@dataclass
class RunConfig:
    model: str = "M2"
    chains: int = 2
    burn_in: int = 1000
    n_iter: int = 3000
    adapt: bool = True
    step_sizes: dict = field(default_factory=dict)
    init: str = "data"
    levels: list = field(default_factory=lambda: [0.01, 0.05, 0.10])
    costs: list = field(default_factory=list)
    rhat_threshold: float = 1.1
    compare_null: bool = True
    force: bool = False
    responses: str | None = None
    times: str | None = None
    output_dir: str | None = None
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        try:
            self.spec = ModelSpec.parse(self.model)
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc
        self.model = self.spec.value
        if int(self.chains) < 1:
            raise ConfigurationError("chains must be at least 1")
        for rho in self.levels:
            if not 0 < float(rho) < 1:
                raise ConfigurationError(f"decision level {rho} outside (0, 1)")
        for c in self.costs:
            if not 0 < float(c) < 1:
                raise ConfigurationError(f"cost {c} outside (0, 1)")
        if self.init not in ("prior", "data"):
            raise ConfigurationError(f"init must be 'prior' or 'data', got {self.init!r}")
        if self.n_jobs < 1:
            raise ConfigurationError("n_jobs must be at least 1")
        self.sampler = SamplerConfig(burn_in=int(self.burn_in), n_iter=int(self.n_iter),
                                     step_sizes=dict(self.step_sizes), adapt=bool(self.adapt))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def read_config(path) -> dict:
    """Parse a JSON configuration file into a plain dictionary."""
    try:
        with open(path) as fh:
            d = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"{path}: no such configuration file") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigurationError(f"{path}: top level must be an object")
    return d


def resolve_output_dir(explicit=None, default="cheatdetect-out") -> Path:
    """Explicit path, else the environment default, else ``default``."""
    return Path(explicit or os.environ.get(OUTPUT_DIR_ENV) or default)


def prepare_output_dir(path, overwrite: bool = False) -> Path:
    path = Path(path)
    if path.exists() and not path.is_dir():
        raise ConfigurationError(f"{path} exists and is not a directory")
    if path.exists() and any(path.iterdir()) and not overwrite:
        raise ConfigurationError(f"{path} is not empty; pass --overwrite to replace its files")
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------- writing

def to_jsonable(obj):
    """Convert numpy containers and non-finite floats (to ``None``) for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_table(path, rows, columns=None) -> None:
    """Write a list of dicts as CSV; missing cells are left empty."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            columns.extend(k for k in r if k not in columns)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, restval="", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in to_jsonable(r).items()})


def read_table(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------- chain persistence

def save_chains(chains, directory, extra: dict | None = None) -> Path:
    """Store each chain as a folder of ``.npy`` columns plus a JSON manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for k, c in enumerate(chains):
        sub = directory / f"chain_{k}"
        sub.mkdir(exist_ok=True)
        for name in ChainOutput.ARRAY_FIELDS + ("deviance",):
            np.save(sub / f"{name}.npy", np.asarray(getattr(c, name)))
        for block, steps in c.step_sizes.items():
            np.save(sub / f"step_{block}.npy", np.asarray(steps, dtype=float))
        entries.append({"folder": sub.name, "model": c.spec.value, "burn_in": int(c.burn_in),
                        "n_draws": c.n_draws, "seed": c.seed, "stream_path": list(c.stream_path),
                        "acceptance": c.acceptance, "step_blocks": sorted(c.step_sizes)})
    manifest = {"format": CHAIN_FORMAT, "version": CHAIN_FORMAT_VERSION, "chains": entries}
    if extra:
        manifest["extra"] = extra
    write_json(directory / "manifest.json", manifest)
    return directory


def load_chains(directory) -> tuple[list, dict]:
    """Inverse of :func:`save_chains`; returns ``(chains, manifest)``."""
    directory = Path(directory)
    path = directory / "manifest.json"
    if not path.is_file():
        raise IngestionError(f"{directory}: no chain manifest found")
    manifest = read_json(path)
    if manifest.get("format") != CHAIN_FORMAT:
        raise IngestionError(f"{path}: not a chain manifest")
    if manifest.get("version") != CHAIN_FORMAT_VERSION:
        raise IngestionError(f"{path}: unsupported manifest version {manifest.get('version')}")
    chains = []
    for e in manifest["chains"]:
        sub = directory / e["folder"]
        arrays = {name: np.load(sub / f"{name}.npy") for name in ChainOutput.ARRAY_FIELDS + ("deviance",)}
        steps = {b: np.load(sub / f"step_{b}.npy") for b in e.get("step_blocks", [])}
        chains.append(ChainOutput(spec=ModelSpec.parse(e["model"]), burn_in=int(e["burn_in"]),
                                  acceptance=e.get("acceptance", {}), step_sizes=steps,
                                  seed=e.get("seed", 0), stream_path=tuple(e.get("stream_path", ())),
                                  **arrays))
    return chains, manifest


# ------------------------------------------------------------ report files

def write_analysis(report: dict, chains, directory, null_chains=()) -> Path:
    """Write the analysis report plus tabular companions for plotting."""
    from . import decision

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_json(directory / "report.json", report)
    rows = [{"parameter": k, **v} for k, v in report["globals"].items()]
    write_table(directory / "globals.csv", rows, ["parameter", "mean", "ci_low", "ci_high"])
    write_table(directory / "person_probs.csv",
                [{"person": i, "prob": p} for i, p in enumerate(report["person_probs"])])
    write_table(directory / "item_probs.csv",
                [{"item": j, "prob": p} for j, p in enumerate(report["item_probs"])])
    write_table(directory / "person_error_curve.csv", decision.error_curve(report["person_probs"]))
    write_table(directory / "item_error_curve.csv", decision.error_curve(report["item_probs"]))
    write_table(directory / "chains.csv", report["chains"],
                ["chain", "converged", "split_rhat", "rhat_vs_best", "mean_deviance", "seed"])
    if "decisions" in report:
        write_detections(directory / "detections.csv", report["decisions"])
    if chains:
        write_table(directory / "deviance_trace.csv", _trace_rows(chains))
        save_chains(chains, directory / "chains", {"role": "model"})
    if null_chains:
        save_chains(null_chains, directory / "null_chains", {"role": "null"})
    return directory


def _trace_rows(chains):
    n = max(len(c.deviance) for c in chains)
    rows = []
    for t in range(n):
        row = {"iteration": t}
        for k, c in enumerate(chains):
            row[f"chain_{k}"] = float(c.deviance[t]) if t < len(c.deviance) else None
        rows.append(row)
    return rows


def write_detections(path, decisions: dict) -> None:
    rows = []
    for side, unit in (("persons", "person"), ("items", "item")):
        for level, d in decisions.get(side, {}).items():
            rows.append({"unit": unit, "rule": "fdr" if side == "persons" else "fnr", "level": level,
                         "threshold": d["threshold"], "n_flagged": d["n_flagged"],
                         "fdr": d["fdr"], "fnr": d["fnr"],
                         "flagged": " ".join(map(str, d["flagged"]))})
    for side, unit in (("bayes_persons", "person"), ("bayes_items", "item")):
        for cost, flagged in decisions.get(side, {}).items():
            rows.append({"unit": unit, "rule": "bayes", "level": cost, "n_flagged": len(flagged),
                         "flagged": " ".join(map(str, flagged))})
    write_table(path, rows, ["unit", "rule", "level", "threshold", "n_flagged", "fdr", "fnr", "flagged"])


def write_study(study, directory) -> Path:
    """Per-replication metrics and per-setting summary of a simulation study."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_table(directory / "replications.csv", study.records)
    rows = [{"setting": s, "metric": k, **v} for s, summ in study.summary.items() for k, v in summ.items()]
    write_table(directory / "summary.csv", rows,
                ["setting", "metric", "mean", "sd", "q05", "median", "q95", "n"])
    write_json(directory / "study.json", {"config": study.config, "summary": study.summary})
    return directory


def read_probabilities(source) -> tuple[np.ndarray, np.ndarray]:
    """Person and item probabilities from a fit output folder or its ``report.json``."""
    source = Path(source)
    path = source / "report.json" if source.is_dir() else source
    if not path.is_file():
        raise IngestionError(f"{source}: no report.json found")
    report = read_json(path)
    try:
        return np.asarray(report["person_probs"], float), np.asarray(report["item_probs"], float)
    except KeyError as exc:
        raise IngestionError(f"{path}: missing {exc.args[0]}") from None


__all__ = ["IngestionError", "RunConfig", "load_dataset", "write_dataset", "read_config",
           "resolve_output_dir", "prepare_output_dir", "save_chains", "load_chains",
           "write_analysis", "write_study", "write_json", "write_table", "read_table",
           "read_probabilities", "OUTPUT_DIR_ENV"]
