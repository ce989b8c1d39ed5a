"""Property-based checks with hypothesis."""

import numpy as np
from conftest import rel_err
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from oracles import rayleigh_scenario
from test_gsbf import single_link

from edgeinfer.conic import Cone, cone_violation, project_cone, smat, svec, svt
from edgeinfer.gsbf import BeamformingProblem, sinr, solve_power_min
from edgeinfer.harness.config import parse_config
from edgeinfer.irs import build_lifted
from edgeinfer.scenario import PhaseVector, compose_irs_channel, crandn, gen_iid_channel, gen_uniform_placement, make_rng
from edgeinfer.shuffle import build_message_set, compile_alignment_constraints, min_rank_bound

seeds = st.integers(min_value=0, max_value=2**32 - 1)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SETTINGS
@given(seeds, st.integers(1, 6))
def test_svec_roundtrip(seed, p):
    A = np.random.default_rng(seed).standard_normal((p, p))
    S = A + A.T
    np.testing.assert_allclose(smat(svec(S), p), S, atol=1e-13)
    assert abs(svec(S) @ svec(S) - np.sum(S * S)) < 1e-9 * (1 + np.sum(S * S))


@SETTINGS
@given(seeds, st.sampled_from(["nonneg", "soc", "psd"]), st.integers(1, 5))
def test_cone_projection_properties(seed, kind, dim):
    cone = Cone(kind, dim)
    s = np.random.default_rng(seed).standard_normal(cone.rows) * 3
    p = project_cone(s, cone)
    assert cone_violation(p, cone) <= 1e-10
    np.testing.assert_allclose(project_cone(p, cone), p, atol=1e-10)
    assert abs((s - p) @ p) <= 1e-9 * (1 + s @ s)


@SETTINGS
@given(seeds, st.floats(0.0, 5.0))
def test_svt_is_nonexpansive(seed, tau):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    Y = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    assert np.linalg.norm(svt(X, tau) - svt(Y, tau)) <= np.linalg.norm(X - Y) + 1e-12


@SETTINGS
@given(
    st.floats(0.1, 100.0),
    st.floats(1e-14, 1e-2),
    st.floats(1e-6, 1.0),
    st.floats(0.0, 2 * np.pi),
)
def test_power_min_closed_form(gamma, noise, mag, phase):
    h = mag * np.exp(1j * phase)
    expected = gamma * noise / mag**2
    p_max = 1e6
    sc = single_link([h], gamma, noise, p_max=p_max)
    sol = solve_power_min(BeamformingProblem.from_scenario(sc), method="conic")
    if expected > p_max * (1 + 1e-6):
        assert not sol.feasible
    elif expected < p_max * (1 - 1e-6):
        assert sol.feasible
        assert rel_err(sol.transmit_power, expected) < 1e-8


@SETTINGS
@given(seeds)
def test_sinr_invariant_to_beamformer_phase(seed):
    rng = make_rng(seed)
    H = crandn(rng, (2, 3, 2))
    W = crandn(rng, (2, 3, 2))
    rot = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    np.testing.assert_allclose(sinr(H, W * rot[None, :, None], 0.1), sinr(H, W, 0.1), rtol=1e-10)


@SETTINGS
@given(seeds, st.integers(1, 5))
def test_composition_affine_in_cascade(seed, M):
    rng = make_rng(seed)
    h = crandn(rng, (3, 3))
    a = crandn(rng, (3, 3, M))
    b = crandn(rng, (3, 3, M))
    v = PhaseVector.random(M, rng)
    lhs = compose_irs_channel(h, a + b, v)
    rhs = compose_irs_channel(h, a, v) + compose_irs_channel(np.zeros((3, 3)), b, v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


@SETTINGS
@given(seeds, st.integers(1, 4))
def test_lifted_identity(seed, M):
    rng = make_rng(seed)
    sc = rayleigh_scenario(rng, M=M)
    lp = build_lifted(sc, crandn(rng, sc.direct.shape))
    v = PhaseVector.random(M, rng)
    H = sc.effective_channels(v)
    g = np.abs(np.einsum("nkl,njl->kj", H.conj(), lp.w)) ** 2
    direct = np.diag(g) - sc.gamma * (g.sum(axis=1) - np.diag(g))
    np.testing.assert_allclose(lp.quadratic(v)[0], direct, rtol=1e-9, atol=1e-9)


@SETTINGS
@given(seeds, st.integers(2, 6), st.integers(1, 5), st.integers(1, 3))
def test_alignment_projection(seed, K, N_f, F):
    F = min(F, N_f)
    if F * K < N_f:  # some file would be stored nowhere
        return
    ms = build_message_set(gen_uniform_placement(K, N_f, F))
    rng = make_rng(seed)
    prob = compile_alignment_constraints(ms, gen_iid_channel(K, rng))
    X = crandn(rng, prob.shape)
    P = prob.project(X)
    assert prob.max_residual(P) <= 1e-10
    assert min_rank_bound(prob) <= min(prob.shape) or not prob.num_constraints


@SETTINGS
@given(st.integers(0, 5), st.integers(1, 5), st.integers(1, 4))
def test_config_range_parse(a, n, step):
    b = a + n * step
    cfg = parse_config(f"[experiment]\nname = edge_power\n[edge_power]\nsinr_db = {a}:{b}:{step}\n")
    assert cfg.params["sinr_db"] == tuple(float(a + i * step) for i in range(n + 1))
