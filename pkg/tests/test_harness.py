"""Experiment harness: config validation, runner determinism, outputs, plotting and CLI."""

import csv
import json
import math
import os

import numpy as np
import pytest

from edgeinfer.errors import ConfigError
from edgeinfer.harness import cli, experiments, runner
from edgeinfer.harness.config import parse_config
from edgeinfer.harness.plot import PlotSpec, emit_plot_data, plot_points, render_svg
from edgeinfer.harness.presets import PRESETS
from edgeinfer.harness.runner import read_trials, run_experiment, summary_csv, trials_csv, write_outputs

SHUFFLE = """\
[experiment]
name = shuffle_dof
master_seed = 7
trials = 2

[shuffle_dof]
K = 3, 4
N_f = 4
F = 2
"""

EDGE = """\
[experiment]
name = edge_power
master_seed = 11
trials = 2

[edge_power]
sinr_db = 0:4:4
N_ap = 2
L = 2
K_u = 2
M = 0, 2
"""

IRS = """\
[experiment]
name = irs_power
master_seed = 13
trials = 2

[irs_power]
sinr_db = 2
N_ap = 2
L = 2
K_u = 2
M = 3
max_rounds = 2
"""


# ------------------------------------------------------------ config


def test_defaults_and_canonical_roundtrip():
    cfg = parse_config(SHUFFLE)
    assert cfg.params["algorithms"] == ("nuclear", "dc")
    assert cfg.sweep_var == "K" and cfg.sweep_values == (3, 4)
    again = parse_config(cfg.as_text())
    assert again.to_dict() == cfg.to_dict()


def test_range_syntax():
    cfg = parse_config(EDGE)
    assert cfg.params["sinr_db"] == (0.0, 4.0)
    cfg = parse_config(EDGE.replace("0:4:4", "0:10:2"))
    assert cfg.params["sinr_db"] == (0.0, 2.0, 4.0, 6.0, 8.0, 10.0)


@pytest.mark.parametrize(
    "edit",
    [
        ("N_f = 4", "N_f = 4\nbogus = 1"),
        ("K = 3, 4", "K = 3, 3"),
        ("K = 3, 4", "K = 1, 4"),
        ("F = 2", "F = 9"),
        ("trials = 2", "trials = 0"),
        ("trials = 2", "trials = two"),
        ("name = shuffle_dof", "name = other"),
        ("master_seed = 7", "master_seed = -1"),
        ("[shuffle_dof]", "[edge_power]\n[shuffle_dof]"),
        ("N_f = 4", "N_f = 4\nalgorithms = nuclear, best"),
    ],
)
def test_invalid_configs_rejected(edit):
    with pytest.raises(ConfigError):
        parse_config(SHUFFLE.replace(*edit))


def test_missing_experiment_section():
    with pytest.raises(ConfigError):
        parse_config("[shuffle_dof]\nK = 3\n")
    with pytest.raises(ConfigError):
        parse_config("not a config")


def test_overrides():
    cfg = parse_config(SHUFFLE, {"trials": 5, "master_seed": 1, "N_f": "5"})
    assert cfg.trials == 5 and cfg.master_seed == 1 and cfg.params["N_f"] == 5
    with pytest.raises(ConfigError):
        parse_config(SHUFFLE, {"nope": 1})


def test_presets_parse():
    for name, text in PRESETS.items():
        cfg = parse_config(text)
        assert cfg.trials >= 50, name
    assert parse_config(PRESETS["fig7"]).params["methods"] == ("dc", "sdr", "random")


# ------------------------------------------------------------ runner


@pytest.fixture(scope="module")
def shuffle_table():
    return run_experiment(parse_config(SHUFFLE))


@pytest.fixture(scope="module")
def edge_table():
    return run_experiment(parse_config(EDGE))


def test_trial_rows_complete(shuffle_table, edge_table):
    assert len(shuffle_table.rows) == 2 * 2 * 2
    assert len(edge_table.rows) == 2 * 2 * 2
    assert edge_table.series == ["no_irs", "irs_m2_random"]
    for r in edge_table.rows:
        assert r.feasible == math.isfinite(r.metric)


def test_workers_do_not_change_results(edge_table):
    cfg = parse_config(EDGE)
    par = run_experiment(cfg, workers=2)
    assert trials_csv(par) == trials_csv(edge_table)
    assert summary_csv(par) == summary_csv(edge_table)


def test_summary_matches_rows(edge_table):
    for s in edge_table.summary:
        vals = [r.metric for r in edge_table.rows if r.sweep_value == s.sweep_value and r.algorithm == s.algorithm and r.feasible]
        assert s.feasible == len(vals)
        if vals:
            assert abs(s.mean - np.mean(vals)) < 1e-15


def test_outputs_and_reload(tmp_path, edge_table):
    cfg = parse_config(EDGE)
    files = write_outputs(edge_table, cfg, tmp_path, ["edgeinfer", "run"])
    assert files == ["config.ini", "manifest.json", "summary.csv", "timings.csv", "trials.csv"]
    with open(tmp_path / "trials.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == runner.TRIAL_COLUMNS
    assert all(r["wall_ms"] == "" for r in rows)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["master_seed"] == 11 and manifest["trial_rows"] == len(edge_table.rows)
    back = read_trials(tmp_path / "trials.csv")
    assert summary_csv(back) == summary_csv(edge_table)
    assert parse_config((tmp_path / "config.ini").read_text()).to_dict() == cfg.to_dict()


def test_record_timing(tmp_path, shuffle_table):
    cfg = parse_config(SHUFFLE.replace("trials = 2", "trials = 2\nrecord_timing = true"))
    text = trials_csv(shuffle_table, cfg.record_timing)
    assert all(line.split(",")[-1] != "" for line in text.splitlines()[1:])


def test_irs_trial_series():
    cfg = parse_config(IRS)
    table = run_experiment(cfg)
    assert table.series == ["dc", "sdr", "random"]
    by_trial = {}
    for r in table.rows:
        by_trial.setdefault(r.trial, {})[r.algorithm] = r
    for d in by_trial.values():
        # shared first round: refinement never ends above the random start
        if d["dc"].feasible and d["random"].feasible:
            assert d["dc"].metric <= d["random"].metric + 1e-9
            assert d["sdr"].metric <= d["random"].metric + 1e-9


def test_failed_trials_are_recorded(monkeypatch):
    def broken(p, sv, seed):
        return [("nuclear", np.nan, False, 0, 0.0, "SolveFailure: boom"), ("dc", 1.0, True, 3, 0.0, "")]

    monkeypatch.setitem(experiments.TRIALS, "shuffle_dof", broken)
    table = run_experiment(parse_config(SHUFFLE))
    assert table.failure_rate == 0.5
    s = [x for x in table.summary if x.algorithm == "nuclear"][0]
    assert s.failures == 2 and s.feasible == 0 and math.isnan(s.mean)


# ------------------------------------------------------------ plotting


def test_plot_data(edge_table, tmp_path):
    text = emit_plot_data(edge_table, path=tmp_path / "p.csv")
    lines = text.splitlines()
    assert lines[0] == "series,x,y,stderr,n"
    assert len(lines) == 1 + 2 * 2
    svg = render_svg(edge_table)
    assert svg.startswith("<svg") and "no_irs" in svg


def test_plot_errors(edge_table):
    with pytest.raises(ConfigError):
        plot_points(edge_table, PlotSpec("t", "x", "y", ("missing",)))
    empty = runner.ResultTable("edge_power", "sinr_db", "total_power_w", ["no_irs"])
    with pytest.raises(ConfigError):
        emit_plot_data(empty)


# ------------------------------------------------------------ CLI


def _write(tmp_path, text):
    path = tmp_path / "c.ini"
    path.write_text(text)
    return str(path)


def test_cli_validate(tmp_path, capsys):
    assert cli.main(["validate", "--config", _write(tmp_path, SHUFFLE)]) == 0
    assert "[shuffle_dof]" in capsys.readouterr().out
    assert cli.main(["validate", "--config", _write(tmp_path, SHUFFLE.replace("F = 2", "F = 0"))]) == 2
    assert cli.main(["validate", "--config", str(tmp_path / "absent.ini")]) == 2


def test_cli_run_byte_identical_across_workers(tmp_path):
    cfg = _write(tmp_path, SHUFFLE)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", cfg, "--out", str(a), "--quiet", "--svg"]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(b), "--quiet", "--workers", "2"]) == 0
    for name in ("trials.csv", "summary.csv", "plot_data.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert os.path.exists(a / "plot.svg")


def test_cli_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--config", _write(tmp_path, SHUFFLE), "--out", str(blocker / "sub"), "--quiet"]) == 3


def test_cli_solver_failure_exit(tmp_path, monkeypatch):
    def broken(p, sv, seed):
        return [("nuclear", np.nan, False, 0, 0.0, "SolveFailure: boom"), ("dc", np.nan, False, 0, 0.0, "SolveFailure: boom")]

    monkeypatch.setitem(experiments.TRIALS, "shuffle_dof", broken)
    out = tmp_path / "o"
    assert cli.main(["run", "--config", _write(tmp_path, SHUFFLE), "--out", str(out), "--quiet"]) == 4
    assert json.loads((out / "manifest.json").read_text())["failure_rate"] == 1.0


def test_cli_reproduce_rejects_unknown_figure():
    with pytest.raises(SystemExit):
        cli.main(["reproduce", "fig9", "--out", "x"])
