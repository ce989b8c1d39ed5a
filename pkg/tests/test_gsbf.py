"""Group-sparse beamforming: power minimization, mixed-norm stage, support scan."""

import numpy as np
import pytest
from conftest import rel_err, small_scenario
from oracles import exhaustive_support

from edgeinfer.errors import InvalidArgument
from edgeinfer.gsbf import (
    BeamformingProblem,
    compile_power_min,
    deactivation_order,
    group_sparse_allocate,
    sinr,
    solve_l12_stage,
    solve_power_min,
    support_sequence,
    total_power,
)
from edgeinfer.scenario import EdgeScenario, IrsLinkSet


def single_link(h, gamma, noise, p_max=1e6, p_c=0.0):
    direct = np.array(h, complex).reshape(1, 1, -1)
    L = direct.shape[2]
    return EdgeScenario(
        ap_pos=np.zeros((1, 2)),
        user_pos=np.ones((1, 2)),
        irs_pos=np.zeros(2),
        direct=direct,
        irs=IrsLinkSet(np.zeros((1, 0, L), complex), np.zeros((1, 0), complex)),
        noise_power=noise,
        p_max=p_max,
        p_c=p_c,
        gamma=np.array([gamma]),
    )


def test_trivial_unit_instance():
    sc = single_link([1.0], 1.0, 1.0)
    sol = solve_power_min(BeamformingProblem.from_scenario(sc), method="conic")
    assert sol.feasible
    assert abs(sol.transmit_power - 1.0) < 1e-9
    assert abs(abs(sol.w[0, 0, 0]) - 1.0) < 1e-9


@pytest.mark.parametrize("method", ["conic", "duality", "auto"])
def test_closed_form_single_user(rng, method):
    for _ in range(10):
        gamma = 10 ** rng.uniform(-1, 2)
        noise = 10 ** rng.uniform(-13, -1)
        h = (rng.standard_normal() + 1j * rng.standard_normal()) * 10 ** rng.uniform(-5, 0)
        sc = single_link([h], gamma, noise)
        sol = solve_power_min(BeamformingProblem.from_scenario(sc), method=method)
        assert sol.feasible
        assert rel_err(sol.transmit_power, gamma * noise / abs(h) ** 2) < 1e-8


def test_closed_form_multi_antenna_mrt(rng):
    h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    sc = single_link(h, 3.0, 0.5)
    sol = solve_power_min(BeamformingProblem.from_scenario(sc), method="conic")
    assert rel_err(sol.transmit_power, 3.0 * 0.5 / np.linalg.norm(h) ** 2) < 1e-8


def test_per_ap_cap_makes_infeasible():
    sc = single_link([1.0], 4.0, 1.0, p_max=1.0)
    sol = solve_power_min(BeamformingProblem.from_scenario(sc))
    assert not sol.feasible
    assert sol.total_power == np.inf


def test_duality_agrees_with_conic():
    for seed in range(5):
        sc = small_scenario(seed, num_users=3, sinr_db=5.0)
        prob = BeamformingProblem.from_scenario(sc)
        a = solve_power_min(prob, method="conic")
        b = solve_power_min(prob, method="duality")
        assert a.feasible and b.feasible
        assert rel_err(b.transmit_power, a.transmit_power) < 1e-7


def test_sinr_recheck_on_solution():
    sc = small_scenario(3, num_aps=3, antennas=2, num_users=4, sinr_db=6.0)
    sol = solve_power_min(BeamformingProblem.from_scenario(sc))
    assert sol.feasible
    s = sinr(sc.direct, sol.w, sc.noise_power)
    assert np.all(s >= sc.gamma * (1 - 1e-6))
    assert np.all(sol.per_ap_power <= sc.p_max + 1e-8)
    assert abs(total_power(sol, sc.p_c) - sol.total_power) < 1e-12


def test_zero_padding_keeps_optimum():
    """Adding a pair to the support never raises the optimal transmit power."""
    sc = small_scenario(4, num_aps=2, num_users=2, sinr_db=3.0)
    prob = BeamformingProblem.from_scenario(sc)
    small = np.array([[True, False], [False, True]])
    big = np.array([[True, True], [False, True]])
    a = solve_power_min(prob, small, method="conic")
    b = solve_power_min(prob, big, method="conic")
    assert a.feasible and b.feasible
    assert b.transmit_power <= a.transmit_power * (1 + 1e-8)


def test_unserved_user():
    sc = small_scenario(1)
    prob = BeamformingProblem.from_scenario(sc)
    act = np.array([[True, False], [True, False]])
    assert compile_power_min(prob, act) is None
    sol = solve_power_min(prob, act)
    assert not sol.feasible and sol.status == "no_serving_ap"
    with pytest.raises(InvalidArgument):
        solve_power_min(prob, np.ones((3, 3), bool))
    with pytest.raises(InvalidArgument):
        solve_power_min(prob, method="magic")


def test_off_support_beamformers_are_exact_zero():
    sc = small_scenario(2, num_aps=2, num_users=2, sinr_db=0.0)
    act = np.array([[True, False], [True, True]])
    sol = solve_power_min(BeamformingProblem.from_scenario(sc), act)
    assert np.all(sol.w[0, 1] == 0)


def test_l12_stage_feasible_and_weighted():
    sc = small_scenario(5, num_aps=2, num_users=3, sinr_db=2.0)
    prob = BeamformingProblem.from_scenario(sc)
    s1 = solve_l12_stage(prob)
    assert s1.feasible
    assert np.all(sinr(prob.channels, s1.w, sc.noise_power) >= sc.gamma * (1 - 1e-6))


def test_deactivation_order_and_sequence():
    norms = np.array([[0.3, 0.1], [0.2, 0.1]])
    order = deactivation_order(norms, 2)
    assert order == [(0, 1), (1, 1), (1, 0), (0, 0)]
    seq = support_sequence(order, 2, 2)
    # (1, 1) is skipped: it would leave user 1 unserved; likewise (0, 0)
    assert len(seq) == 3
    for a, b in zip(seq, seq[1:]):
        assert np.all(b <= a) and b.sum() == a.sum() - 1
    assert np.all(seq[-1].any(axis=0))


def test_support_scan_monotone_transmit_power():
    sc = small_scenario(6, num_aps=3, num_users=3, sinr_db=4.0)
    prob = BeamformingProblem.from_scenario(sc)
    s1 = solve_l12_stage(prob)
    seq = support_sequence(deactivation_order(np.linalg.norm(s1.w, axis=-1), 3), 3, 3)
    tx = [solve_power_min(prob, a, method="conic") for a in seq]
    feas = [t.feasible for t in tx]
    # feasibility is a prefix, transmit power nondecreasing within it
    first_bad = feas.index(False) if False in feas else len(feas)
    assert not any(feas[first_bad:])
    vals = [t.transmit_power for t in tx[:first_bad]]
    assert all(b >= a * (1 - 1e-7) for a, b in zip(vals, vals[1:]))


def test_group_sparse_matches_linear_scan():
    sc = small_scenario(7, num_aps=3, num_users=3, sinr_db=4.0, p_c=0.45)
    prob = BeamformingProblem.from_scenario(sc)
    out = group_sparse_allocate(prob)
    log = dict(out.log)
    seq = support_sequence(deactivation_order(log["stage1_norms"], 3), 3, 3)
    best = (np.inf, None)
    for J, act in enumerate(seq):
        sol = solve_power_min(prob, act)
        if not sol.feasible:
            break
        if sol.total_power < best[0] - 1e-12:
            best = (sol.total_power, J)
    assert log["chosen"] == best[1]
    assert rel_err(out.total_power, best[0]) < 1e-9


def test_group_sparse_within_exhaustive_optimum():
    for seed in range(3):
        sc = small_scenario(20 + seed, num_aps=2, num_users=2, sinr_db=3.0)
        prob = BeamformingProblem.from_scenario(sc)
        opt, _ = exhaustive_support(prob)
        got = group_sparse_allocate(prob)
        assert got.feasible
        assert opt - 1e-5 <= got.total_power <= opt * 1.10


def test_group_sparse_infeasible_instance():
    sc = single_link([1e-6], 10.0, 1.0, p_max=1.0)
    out = group_sparse_allocate(BeamformingProblem.from_scenario(sc))
    assert not out.feasible
    assert out.total_power == np.inf


def test_problem_validation():
    sc = small_scenario(1)
    with pytest.raises(InvalidArgument):
        BeamformingProblem(sc, np.zeros((1, 1, 1)))
    with pytest.raises(InvalidArgument):
        BeamformingProblem(sc, sc.direct, weights=-np.ones((2, 2)))
