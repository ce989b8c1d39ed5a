"""One Monte Carlo trial per (experiment, sweep point, trial index).

Each trial function is a pure function of its arguments: all randomness comes
from generators seeded by the trial seed. The scenario and the algorithms use
separate child streams, and every algorithm restarts the same algorithm
stream, so methods compared within a trial see the same channels and the same
initial random phases.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from ..errors import ConfigError, SolveFailure
from ..irs import alternating_optimize
from ..scenario import EdgeConfig, IrsLinkSet, gen_geometric_scenario, make_rng
from ..shuffle import run_dof_trial


def _streams(seed):
    scen, alg = np.random.SeedSequence(seed).spawn(2)
    return make_rng(scen), alg


def _edge_config(p, sinr_db, M):
    return EdgeConfig(
        num_aps=p["N_ap"],
        antennas=p["L"],
        num_users=p["K_u"],
        num_elements=M,
        side=p["side"],
        noise_dbm=p["noise_dbm"],
        p_max=p["P_max"],
        p_c=p["P_c"],
        eta=p["eta"],
        sinr_db=sinr_db,
        antenna_gain_db=p["antenna_gain_db"],
    )


def _restrict_irs(scenario, M):
    """Scenario keeping the first ``M`` IRS elements (nested IRS sizes share draws)."""
    if M == scenario.num_elements:
        return scenario
    if M == 0:
        return scenario.without_irs()
    irs = IrsLinkSet(scenario.irs.ap_to_irs[:, :M, :], scenario.irs.irs_to_user[:, :M])
    return replace(scenario, irs=irs)


def _alt(scenario, alg_ss, p, method):
    return alternating_optimize(
        scenario,
        make_rng(alg_ss),
        phase_method=method,
        max_rounds=p["max_rounds"],
        power_tol=p["power_tol"],
        num_restarts=p["num_restarts"],
        best_of=p["R"] if method == "random" else 1,
        num_randomizations=p["num_randomizations"],
        dc_opts={"eps_rank1": p["eps_rank1"], "max_iter": p["max_dc_iter"]},
        power_method=p["power_method"],
    )


def _timed(fn):
    t0 = time.perf_counter()
    try:
        out, err = fn(), ""
    except (SolveFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        out, err = None, f"{type(exc).__name__}: {exc}"
    return out, err, 1e3 * (time.perf_counter() - t0)


def shuffle_trial(p, sweep_value, seed):
    K = int(sweep_value)
    rng = make_rng(seed)
    dc_opts = {"eps_dc": p["eps_dc"], "max_dc_iter": p["max_dc_iter"], "restarts": p["dc_restarts"]}
    res, err, ms = _timed(
        lambda: run_dof_trial(
            K, p["N_f"], p["F"], rng, p["irs_elements"], p["irs_draws"], p["beta"], p["decoders"], dc_opts
        )
    )
    rows = []
    for alg in p["algorithms"]:
        if res is None:
            rows.append((alg, np.nan, False, 0, ms, err))
            continue
        sol = res[0] if alg == "nuclear" else res[1]
        dof = float(sol.dof) if sol.dof is not None else np.nan
        iters = sol.iterations if alg == "nuclear" else int(sum(sol.dc_steps.values()))
        rows.append((alg, dof, bool(sol.ok), iters, ms, sol.message if not sol.ok else ""))
    return rows


def edge_trial(p, sweep_value, seed):
    rng, alg_ss = _streams(seed)
    Mmax = max(p["M"])
    base = gen_geometric_scenario(_edge_config(p, sweep_value, Mmax), rng)
    rows = []
    for M in p["M"]:
        sc = _restrict_irs(base, M)
        method = p["phase_method"] if M > 0 else "random"
        res, err, ms = _timed(lambda: _alt(sc, alg_ss, p, method))
        name = "no_irs" if M == 0 else f"irs_m{M}_{method}"
        rows.append(_edge_row(name, res, err, ms))
    return rows


def irs_trial(p, sweep_value, seed):
    rng, alg_ss = _streams(seed)
    sc = gen_geometric_scenario(_edge_config(p, sweep_value, p["M"]), rng)
    rows = []
    for method in p["methods"]:
        res, err, ms = _timed(lambda: _alt(sc, alg_ss, p, method))
        rows.append(_edge_row(method, res, err, ms))
    return rows


def _edge_row(name, res, err, ms):
    """``(algorithm, metric, feasible, iters, wall_ms, error)``; infeasible trials carry NaN power."""
    if res is None:
        return (name, np.nan, False, 0, ms, err)
    sol = res.solution
    metric = sol.total_power if sol.feasible else np.nan
    return (name, metric, bool(sol.feasible), res.iterations, ms, "")


TRIALS = {"shuffle_dof": shuffle_trial, "edge_power": edge_trial, "irs_power": irs_trial}


def series_names(cfg):
    """Algorithm labels a config produces, in output order."""
    p = cfg.params
    if cfg.experiment == "shuffle_dof":
        return list(p["algorithms"])
    if cfg.experiment == "edge_power":
        return ["no_irs" if M == 0 else f"irs_m{M}_{p['phase_method']}" for M in p["M"]]
    if cfg.experiment == "irs_power":
        return list(p["methods"])
    raise ConfigError(f"unknown experiment {cfg.experiment!r}")
