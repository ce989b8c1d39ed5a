"""Run a configured experiment and write ``trials.csv``, ``summary.csv`` and a manifest."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata

import numpy as np

from ..errors import ConfigError
from ..scenario import trial_seed
from .config import ExperimentConfig
from .experiments import TRIALS, series_names

TRIAL_COLUMNS = [
    "experiment",
    "sweep_var",
    "sweep_value",
    "trial",
    "seed",
    "algorithm",
    "primary_metric",
    "feasible",
    "solver_iters",
    "wall_ms",
]
SUMMARY_COLUMNS = [
    "experiment",
    "sweep_var",
    "sweep_value",
    "algorithm",
    "metric",
    "trials",
    "feasible",
    "infeasible",
    "failures",
    "mean",
    "stderr",
]
METRIC = {"shuffle_dof": "dof", "edge_power": "total_power_w", "irs_power": "total_power_w"}
FAILURE_LIMIT = 0.5


@dataclass
class TrialRow:
    experiment: str
    sweep_var: str
    sweep_value: object
    trial: int
    seed: int
    algorithm: str
    metric: float
    feasible: bool
    solver_iters: int
    wall_ms: float
    error: str = ""

    @property
    def failed(self):
        return bool(self.error)


@dataclass
class SummaryRow:
    experiment: str
    sweep_var: str
    sweep_value: object
    algorithm: str
    metric_name: str
    trials: int
    feasible: int
    infeasible: int
    failures: int
    mean: float
    stderr: float


@dataclass
class ResultTable:
    experiment: str
    sweep_var: str
    metric_name: str
    series: list
    rows: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    @property
    def failure_rate(self):
        return sum(r.failed for r in self.rows) / len(self.rows) if self.rows else 0.0

    def values(self, algorithm, sweep_value, paired_with=()):
        """Feasible metric values for one series at one sweep point.

        With ``paired_with``, only trials feasible for all listed series count.
        """
        ok = {}
        for r in self.rows:
            if r.sweep_value == sweep_value and r.feasible and not r.failed:
                ok.setdefault(r.trial, {})[r.algorithm] = r.metric
        need = {algorithm, *paired_with}
        return np.array([d[algorithm] for t, d in sorted(ok.items()) if need <= set(d)])


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(v)


def _run_one(args):
    experiment, params, sweep_value, seed = args
    return TRIALS[experiment](params, sweep_value, seed)


def summarize(table: ResultTable):
    """Aggregate rows: mean and standard error over feasible, non-failed trials."""
    out = []
    sweep_values = list(dict.fromkeys(r.sweep_value for r in table.rows))
    for sv in sweep_values:
        for alg in table.series:
            rows = [r for r in table.rows if r.sweep_value == sv and r.algorithm == alg]
            vals = np.array([r.metric for r in rows if r.feasible and not r.failed], dtype=float)
            fails = sum(r.failed for r in rows)
            n = vals.size
            mean = float(np.mean(vals)) if n else float("nan")
            se = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
            out.append(
                SummaryRow(
                    table.experiment,
                    table.sweep_var,
                    sv,
                    alg,
                    table.metric_name,
                    len(rows),
                    n,
                    len(rows) - n - fails,
                    fails,
                    mean,
                    se,
                )
            )
    return out


def run_experiment(cfg: ExperimentConfig, workers=None, progress=None) -> ResultTable:
    """Run every (sweep point, trial); rows come back in deterministic order."""
    workers = cfg.workers if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be positive")
    tasks, keys = [], []
    for si, sv in enumerate(cfg.sweep_values):
        for t in range(cfg.trials):
            seed = trial_seed(cfg.master_seed, cfg.experiment, si, t)
            tasks.append((cfg.experiment, cfg.params, sv, seed))
            keys.append((sv, t, seed))
    if workers == 1:
        results = map(_run_one, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_one, tasks, chunksize=1)
    table = ResultTable(cfg.experiment, cfg.sweep_var, METRIC[cfg.experiment], series_names(cfg))
    try:
        for (sv, t, seed), trial_rows in zip(keys, results):
            for alg, metric, feasible, iters, ms, err in trial_rows:
                table.rows.append(
                    TrialRow(cfg.experiment, cfg.sweep_var, sv, t, seed, alg, float(metric), feasible, int(iters), ms, err)
                )
            if progress:
                progress(len(table.rows))
    finally:
        if workers > 1:
            pool.shutdown()
    table.summary = summarize(table)
    return table


def trials_csv(table: ResultTable, record_timing=False):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for r in table.rows:
        w.writerow(
            [
                r.experiment,
                r.sweep_var,
                _fmt(r.sweep_value),
                r.trial,
                r.seed,
                r.algorithm,
                _fmt(r.metric),
                _fmt(r.feasible),
                r.solver_iters,
                f"{r.wall_ms:.3f}" if record_timing else "",
            ]
        )
    return buf.getvalue()


def summary_csv(table: ResultTable):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for s in table.summary:
        w.writerow(
            [
                s.experiment,
                s.sweep_var,
                _fmt(s.sweep_value),
                s.algorithm,
                s.metric_name,
                s.trials,
                s.feasible,
                s.infeasible,
                s.failures,
                _fmt(s.mean),
                _fmt(s.stderr),
            ]
        )
    return buf.getvalue()


def build_id():
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return f"artifact-{version} python-{platform.python_version()} numpy-{np.__version__}"


def write_outputs(table: ResultTable, cfg: ExperimentConfig, out_dir, argv=None):
    """Write trials.csv, summary.csv, timings.csv, manifest.json and config echo."""
    os.makedirs(out_dir, exist_ok=True)
    files = {
        "trials.csv": trials_csv(table, cfg.record_timing),
        "summary.csv": summary_csv(table),
        "config.ini": cfg.as_text(),
    }
    timing = io.StringIO()
    tw = csv.writer(timing, lineterminator="\n")
    tw.writerow(["sweep_value", "trial", "algorithm", "wall_ms"])
    for r in table.rows:
        tw.writerow([_fmt(r.sweep_value), r.trial, r.algorithm, f"{r.wall_ms:.3f}"])
    files["timings.csv"] = timing.getvalue()
    errors = [f"{r.sweep_value},{r.trial},{r.algorithm}: {r.error}" for r in table.rows if r.failed]
    manifest = {
        "config": cfg.to_dict(),
        "master_seed": cfg.master_seed,
        "build": build_id(),
        "command": list(argv if argv is not None else sys.argv),
        "trial_rows": len(table.rows),
        "summary_rows": len(table.summary),
        "failure_rate": table.failure_rate,
        "failures": errors,
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return sorted(files)


def read_trials(path):
    """Load trials.csv back into a :class:`ResultTable` (summary recomputed)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} has no trial rows")
    exp = rows[0]["experiment"]
    series = list(dict.fromkeys(r["algorithm"] for r in rows))
    table = ResultTable(exp, rows[0]["sweep_var"], METRIC.get(exp, "metric"), series)
    for r in rows:
        sv = float(r["sweep_value"]) if exp != "shuffle_dof" else int(r["sweep_value"])
        table.rows.append(
            TrialRow(
                exp,
                r["sweep_var"],
                sv,
                int(r["trial"]),
                int(r["seed"]),
                r["algorithm"],
                float(r["primary_metric"]),
                r["feasible"] == "true",
                int(r["solver_iters"]),
                float(r["wall_ms"]) if r["wall_ms"] else float("nan"),
            )
        )
    table.summary = summarize(table)
    return table
