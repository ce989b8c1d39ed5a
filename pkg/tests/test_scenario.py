"""Scenario generation: placements, channels, IRS composition, seeding."""

import numpy as np
import pytest

from edgeinfer.errors import InvalidArgument
from edgeinfer.scenario import (
    EdgeConfig,
    InterferenceChannel,
    Placement,
    PhaseVector,
    ap_positions,
    compose_irs_channel,
    crandn,
    dbm_to_watt,
    edge_cascade,
    gen_geometric_scenario,
    gen_iid_channel,
    gen_shuffle_cascade,
    gen_uniform_placement,
    make_rng,
    trial_seed,
)


def test_trial_seed_is_pure_and_distinct():
    a = trial_seed(2020, "edge_power", 3, 7)
    assert a == trial_seed(2020, "edge_power", 3, 7)
    others = {trial_seed(2020, "edge_power", 3, 8), trial_seed(2020, "irs_power", 3, 7), trial_seed(2021, "edge_power", 3, 7)}
    assert a not in others and len(others) == 3
    assert 0 <= a < 2**64


def test_crandn_variance():
    z = crandn(make_rng(1), 200000, var=2.0)
    assert abs(np.mean(np.abs(z) ** 2) - 2.0) < 0.03
    assert abs(np.mean(z.real**2) - np.mean(z.imag**2)) < 0.03


def test_uniform_placement_cyclic():
    p = gen_uniform_placement(5, 5, 2)
    assert p.stores == ((0, 1), (2, 3), (4, 0), (1, 2), (3, 4))
    np.testing.assert_array_equal(p.replication(), [2, 2, 2, 2, 2])
    assert p.holders(0) == (0, 2)


@pytest.mark.parametrize("args", [(0, 5, 2), (3, 2, 3), (3, 0, 1)])
def test_placement_rejects_bad_sizes(args):
    with pytest.raises(InvalidArgument):
        gen_uniform_placement(*args)


def test_placement_validates_sets():
    with pytest.raises(InvalidArgument):
        Placement(2, 3, 2, ((0, 0), (1, 2)))
    with pytest.raises(InvalidArgument):
        Placement(2, 3, 2, ((0, 3), (1, 2)))
    with pytest.raises(InvalidArgument):
        Placement(2, 3, 2, ((0, 1),))


def test_iid_channel_and_scaling(rng):
    ch = gen_iid_channel(4, rng)
    assert ch.coeffs.shape == (4, 4)
    assert not ch.coeffs.flags.writeable
    np.testing.assert_allclose(ch.scaled(2.0).coeffs, 2.0 * ch.coeffs)
    with pytest.raises(InvalidArgument):
        gen_iid_channel(1, rng)
    with pytest.raises(InvalidArgument):
        InterferenceChannel(np.ones((2, 3)))


def test_phase_vector():
    v = PhaseVector.from_angles([0.0, np.pi / 2])
    np.testing.assert_allclose(v.v, [1, 1j], atol=1e-15)
    np.testing.assert_allclose(v.angles, [0, np.pi / 2])
    p = PhaseVector.project([2.0, 0.0, -3j])
    np.testing.assert_allclose(p.v, [1, 1, -1j])
    with pytest.raises(InvalidArgument):
        PhaseVector([1.5])


def test_shuffle_composition_closed_form(rng):
    h = crandn(rng, (3, 3))
    a = gen_shuffle_cascade(3, 4, rng)
    v = PhaseVector.random(4, rng)
    out = compose_irs_channel(h, a, v)
    for k in range(3):
        for j in range(3):
            assert abs(out[k, j] - (h[k, j] + np.vdot(v.v, a[k, j]))) < 1e-12


def test_edge_composition_matches_definition(rng):
    N, K, L, M = 2, 3, 2, 4
    h = crandn(rng, (N, K, L))
    F = crandn(rng, (N, M, L))
    g = crandn(rng, (K, M))
    v = PhaseVector.random(M, rng)
    out = compose_irs_channel(h, edge_cascade(F, g), v)
    for n in range(N):
        for k in range(K):
            ref = h[n, k] + F[n].conj().T @ np.diag(v.v).conj() @ g[k]
            np.testing.assert_allclose(out[n, k], ref, atol=1e-12)


def test_composition_zero_elements_is_identity(rng):
    h = crandn(rng, (2, 2, 3))
    out = compose_irs_channel(h, np.zeros((2, 2, 3, 0)), PhaseVector(np.zeros(0)))
    np.testing.assert_array_equal(out, h)
    with pytest.raises(InvalidArgument):
        compose_irs_channel(h, np.zeros((2, 2, 3, 2)), PhaseVector.random(3, rng))


def test_geometric_scenario_shapes_and_ranges():
    sc = gen_geometric_scenario(EdgeConfig(sinr_db=4.0), make_rng(5))
    assert sc.direct.shape == (3, 10, 5)
    assert sc.irs.cascade().shape == (3, 10, 5, 25)
    assert np.all((sc.user_pos >= 0) & (sc.user_pos <= 200))
    np.testing.assert_allclose(sc.gamma, 10 ** 0.4)
    assert abs(sc.noise_power - dbm_to_watt(-100.0)) < 1e-25
    np.testing.assert_array_equal(sc.ap_pos, [[0, 0], [200, 0], [100, 200]])


def test_direct_channels_do_not_depend_on_irs_size():
    a = gen_geometric_scenario(EdgeConfig(num_elements=0), make_rng(9))
    b = gen_geometric_scenario(EdgeConfig(num_elements=25), make_rng(9))
    np.testing.assert_array_equal(a.direct, b.direct)
    np.testing.assert_array_equal(a.user_pos, b.user_pos)


def test_without_irs_and_effective_channels():
    sc = gen_geometric_scenario(EdgeConfig(num_elements=4), make_rng(2))
    v = PhaseVector.random(4, make_rng(3))
    eff = sc.effective_channels(v)
    assert not np.allclose(eff, sc.direct)
    bare = sc.without_irs()
    assert bare.num_elements == 0
    np.testing.assert_array_equal(bare.effective_channels(v), sc.direct)


def test_ap_positions_general():
    P = ap_positions(4, 100.0)
    assert P.shape == (4, 2)
    np.testing.assert_allclose(np.linalg.norm(P - 50.0, axis=1), 50.0)


@pytest.mark.parametrize(
    "kw", [{"num_aps": 0}, {"num_elements": -1}, {"p_max": 0.0}, {"p_c": -1.0}, {"eta": 0.0}, {"side": 0.0}]
)
def test_edge_config_validation(kw):
    with pytest.raises(InvalidArgument):
        EdgeConfig(**kw)


def test_scenario_invariants():
    sc = gen_geometric_scenario(EdgeConfig(num_elements=0), make_rng(1))
    with pytest.raises(InvalidArgument):
        sc.with_gamma(np.zeros(10))
    with pytest.raises(InvalidArgument):
        sc.with_gamma(np.ones(3))
