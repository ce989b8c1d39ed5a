"""IRS phase-shift optimization by matrix lifting, and the alternating loop.

With beamformers fixed, ``h_k(v)^H w_j = c_kj + b_kj^H v`` is affine in the
phase vector ``v``. Homogenizing with ``t`` (``|t| = 1``) and lifting
``V = [v; t][v; t]^H`` turns each SINR constraint into ``Tr(Q_k V) >= rho_k``
with ``Q_k = R_kk - gamma_k sum_{j != k} R_kj`` and ``R_kj = a a^H``,
``a = [b_kj; conj(c_kj)]``. The phase update maximizes the minimum slack
``Tr(Q_k V) - rho_k`` over ``diag(V) = 1, V >= 0``; DC adds the rank-one
penalty ``Tr(V) - ||V||_2`` with an increasing weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import NONNEG, PSD, ZERO, ComplexConicProgram, Cone, complex_psd_dual, embed_complex, hermitian_tril
from .conic import solve_conic
from .errors import InvalidArgument, SolveFailure
from .gsbf import BeamformingProblem, BeamformingSolution, group_sparse_allocate
from .scenario import EdgeScenario, PhaseVector

PHASE_METHODS = ("dc", "sdr", "random")
EPS_RANK1 = 1e-4
MAX_DC_ITER = 30
NUM_RANDOMIZATIONS = 200
SDP_TOL = 1e-8
SCALE_SPREAD = 1e2  # largest |Q| / scale allowed in the normalized lifted SDP


@dataclass
class LiftedPhaseProblem:
    """Homogenized lifted SINR constraints for fixed beamformers."""

    Q: np.ndarray  # (K, M+1, M+1) Hermitian
    rho: np.ndarray  # (K,) watts
    direct: np.ndarray  # (N, K, L)
    cascade: np.ndarray  # (N, K, L, M)
    w: np.ndarray  # (N, K, L)
    gamma: np.ndarray
    noise_power: float

    @property
    def order(self):
        return self.Q.shape[-1]

    @property
    def num_elements(self):
        return self.order - 1

    def quadratic(self, phases):
        """``vt^H Q_k vt`` for ``vt = [v; 1]`` (one row per user; ``phases`` may be (R, M))."""
        v = np.atleast_2d(phases.v if isinstance(phases, PhaseVector) else phases)
        vt = np.concatenate([v, np.ones((v.shape[0], 1))], axis=1)
        return np.real(np.einsum("ri,kij,rj->rk", vt.conj(), self.Q, vt))

    def slack(self, phases):
        """Minimum SINR slack ``min_k (|h_k^H w_k|^2 - gamma_k I_k - gamma_k sigma^2)``.

        Evaluated directly from composed channels, not from ``Q``.
        """
        v = phases.v if isinstance(phases, PhaseVector) else np.asarray(phases)
        H = self.direct + self.cascade @ np.conj(v) if v.size else self.direct
        g = np.abs(np.einsum("nkl,njl->kj", H.conj(), self.w)) ** 2
        sig = np.diag(g)
        interf = g.sum(axis=1) - sig
        return float(np.min(sig - self.gamma * interf - self.gamma * self.noise_power))


@dataclass
class PhaseResult:
    phases: PhaseVector
    method: str
    slack: float
    feasible: bool
    rank_ratio: float = np.nan  # sigma_2 / sigma_1 of the lifted V
    dc_iterations: int = 0
    V: np.ndarray = None
    status: str = "ok"


def build_lifted(scenario: EdgeScenario, sol) -> LiftedPhaseProblem:
    """Lifted constraint data for the beamformers of ``sol`` (or a raw ``w`` array)."""
    M = scenario.num_elements
    if M == 0:
        raise InvalidArgument("phase optimization needs an IRS with at least one element")
    w = sol.w if isinstance(sol, BeamformingSolution) else np.asarray(sol, dtype=complex)
    direct = scenario.direct
    cascade = scenario.irs.cascade()  # (N, K, L, M)
    if w.shape != direct.shape:
        raise InvalidArgument(f"beamformers {w.shape} do not match channels {direct.shape}")
    c = np.einsum("nkl,njl->kj", direct.conj(), w)  # c[k, j] = sum_n d[n,k]^H w[n,j]
    a = np.einsum("nklm,njl->kjm", cascade.conj(), w)  # h^H w = c + a^T v
    vec = np.concatenate([np.conj(a), np.conj(c)[..., None]], axis=-1)  # [b; conj(c)], b = conj(a)
    R = vec[..., :, None] * vec[..., None, :].conj()  # (K, K, M+1, M+1)
    K = w.shape[1]
    gamma = scenario.gamma
    Q = np.empty((K, M + 1, M + 1), complex)
    for k in range(K):
        others = np.delete(np.arange(K), k)
        Q[k] = R[k, k] - gamma[k] * R[k, others].sum(axis=0)
        Q[k] = 0.5 * (Q[k] + Q[k].conj().T)
    rho = gamma * scenario.noise_power
    return LiftedPhaseProblem(Q, rho, direct, cascade, w, gamma.copy(), scenario.noise_power)


# ------------------------------------------------------------- lifted SDP


def _slack_scale(lp: LiftedPhaseProblem):
    """Common divisor of ``Q`` and ``rho`` keeping the normalized SDP data O(1)."""
    return max(float(np.mean(lp.rho)), float(np.abs(lp.Q).max()) / SCALE_SPREAD)


def _solve_lifted(lp: LiftedPhaseProblem, C=None, tol=SDP_TOL):
    """Solve ``max s - <C, V>`` s.t. ``Tr(Q_k V) - rho_k >= s``, ``diag V = 1``, ``V >= 0``.

    Works on the dual ``max sum_k mu_k rho'_k + sum_i y_i`` s.t.
    ``C - sum_k mu_k Q'_k - Diag(y) >= 0``, ``sum mu = 1``, ``mu >= 0``
    (primes: data divided by ``_slack_scale``), whose PSD multiplier is ``V``.
    ``C`` is in slack units of the mean ``rho``. Returns ``(V, s)`` with ``s``
    in watts.
    """
    K, p = lp.Q.shape[0], lp.order
    scale = _slack_scale(lp)
    Qs = lp.Q / scale
    rs = lp.rho / scale
    C = np.zeros((p, p)) if C is None else C * (np.mean(lp.rho) / scale)
    d = K + p
    real = np.ones(d, bool)
    cvec = np.concatenate([rs, np.ones(p)])  # minimize -(mu . rho' + sum y)
    cvec = -cvec
    ones = sp.csr_matrix(np.concatenate([np.ones(K), np.zeros(p)])[None, :])
    nonneg = sp.hstack([-sp.eye(K), sp.csr_matrix((K, p))], format="csr")
    cols = [hermitian_tril(Qs[k]) for k in range(K)]
    for i in range(p):
        E = np.zeros((p, p))
        E[i, i] = 1.0
        cols.append(hermitian_tril(E))
    Apsd = np.stack(cols, axis=1)
    blocks = [
        (ones, np.ones(1), Cone(ZERO, 1)),
        (nonneg, np.zeros(K), Cone(NONNEG, K)),
        (Apsd, hermitian_tril(C), Cone(PSD, p)),
    ]
    cp = ComplexConicProgram(cvec, blocks, real_vars=real)
    res = solve_conic(embed_complex(cp), tol=tol)
    if not res.optimal:
        raise SolveFailure(f"lifted phase SDP ended with status {res.status}")
    V = complex_psd_dual(res.y[2], p)
    # clean up round-off: PSD projection and unit diagonal
    lam, U = np.linalg.eigh(V)
    V = (U * np.maximum(lam, 0.0)) @ U.conj().T
    dg = np.sqrt(np.maximum(np.real(np.diag(V)), 1e-300))
    V = V / np.outer(dg, dg)
    s = float(np.min(np.real(np.einsum("kij,ji->k", lp.Q, V)) - lp.rho))
    return V, s


def _top(V):
    lam, U = np.linalg.eigh(V)
    return lam[::-1], U[:, -1]


def _extract(u):
    """Phase vector from a homogenized vector ``[v; t]``."""
    t = u[-1]
    ref = t / abs(t) if abs(t) > 0 else 1.0
    return PhaseVector.project(u[:-1] / ref)


def _rank_ratio(lam):
    return float(max(lam[1], 0.0) / lam[0]) if lam.size > 1 and lam[0] > 0 else 0.0


def solve_phase_sdr(lp: LiftedPhaseProblem, num_randomizations=NUM_RANDOMIZATIONS, rng=None, tol=SDP_TOL):
    """Semidefinite relaxation with Gaussian randomization.

    The top-eigenvector candidate is always evaluated (draw index 0); the
    best direct-evaluated slack wins, ties broken by the lower index.
    """
    if num_randomizations < 0:
        raise InvalidArgument("num_randomizations must be nonnegative")
    V, _ = _solve_lifted(lp, tol=tol)
    lam, u = _top(V)
    cands = [_extract(u).v]
    if num_randomizations:
        if rng is None:
            raise InvalidArgument("an rng is required for randomization")
        lam_all, U = np.linalg.eigh(V)
        L = U * np.sqrt(np.maximum(lam_all, 0.0))
        xi = (rng.standard_normal((num_randomizations, lp.order)) + 1j * rng.standard_normal((num_randomizations, lp.order))) / np.sqrt(2)
        samples = xi @ L.T
        for smp in samples:
            cands.append(_extract(smp).v)
    cands = np.array(cands)
    slacks = [lp.slack(c) for c in cands]
    best = int(np.argmax(slacks))
    ph = PhaseVector(cands[best])
    slack = slacks[best]
    return PhaseResult(ph, "sdr", slack, slack >= 0, _rank_ratio(lam), 0, V)


def solve_phase_dc(lp: LiftedPhaseProblem, eps_rank1=EPS_RANK1, max_iter=MAX_DC_ITER, c0=None, growth=2.0, tol=SDP_TOL):
    """DC rank-one pursuit on the lifted max-min-slack problem.

    Starts from the relaxation, then solves ``max s - c_t (Tr V - <u_t u_t^H, V>)``
    with ``u_t`` the top eigenvector of ``V_t`` and ``c_t = c0 growth^t``, until
    ``Tr V - ||V||_2 <= eps_rank1 Tr V``. The best extracted phases over all
    iterates (by direct slack) are returned.
    """
    p = lp.order
    V, s0 = _solve_lifted(lp, tol=tol)
    if c0 is None:
        c0 = 0.1 * max(abs(s0) / np.mean(lp.rho), 1.0) / p
    lam, u = _top(V)
    best_ph = _extract(u)
    best = lp.slack(best_ph)
    it = 0
    status = "max_iter"
    c = c0
    for it in range(1, max_iter + 1):
        if np.trace(V).real - lam[0] <= eps_rank1 * np.trace(V).real:
            status = "converged"
            it -= 1
            break
        C = c * (np.eye(p) - np.outer(u, u.conj()))
        try:
            V, _ = _solve_lifted(lp, C, tol=tol)
        except SolveFailure:
            # very large penalty weights can stall the subproblem; keep the best iterate
            status = "stalled"
            it -= 1
            break
        lam, u = _top(V)
        ph = _extract(u)
        sl = lp.slack(ph)
        if sl > best:
            best, best_ph = sl, ph
        c *= growth
    else:
        if np.trace(V).real - lam[0] <= eps_rank1 * np.trace(V).real:
            status = "converged"
    return PhaseResult(best_ph, "dc", best, best >= 0, _rank_ratio(lam), it, V, status)


def random_phases(lp_or_M, rng):
    M = lp_or_M.num_elements if isinstance(lp_or_M, LiftedPhaseProblem) else int(lp_or_M)
    return PhaseVector.random(M, rng)


# ------------------------------------------------------- alternating loop


@dataclass
class RoundLog:
    round: int
    total_power: float
    accepted: bool
    slack: float = np.nan


@dataclass
class AlternatingResult:
    solution: BeamformingSolution
    phases: PhaseVector
    log: list = field(default_factory=list)

    @property
    def feasible(self):
        return self.solution.feasible

    @property
    def total_power(self):
        return self.solution.total_power

    @property
    def iterations(self):
        return len(self.log)


def _allocate(scenario, phases, method):
    prob = BeamformingProblem.from_scenario(scenario, phases)
    return group_sparse_allocate(prob, method=method)


def alternating_optimize(
    scenario: EdgeScenario,
    rng,
    phase_method="dc",
    max_rounds=5,
    power_tol=1e-6,
    num_restarts=1,
    best_of=1,
    num_randomizations=NUM_RANDOMIZATIONS,
    dc_opts=None,
    power_method="auto",
):
    """Alternate group-sparse beamforming and phase updates (keep-best).

    Round 1 draws ``best_of`` random phase vectors and keeps the lowest total
    power; if none is feasible it keeps drawing up to ``num_restarts`` draws
    in all. Each later round solves the phase update for the current
    beamformers and re-runs the allocation; the new pair is kept only if
    total power drops by more than ``power_tol``. ``phase_method="random"``
    stops after round 1. With no IRS elements this is a single allocation on
    the direct channels.
    """
    if phase_method not in PHASE_METHODS:
        raise InvalidArgument(f"phase_method must be one of {PHASE_METHODS}")
    if max_rounds < 1 or num_restarts < 1 or best_of < 1:
        raise InvalidArgument("max_rounds, num_restarts and best_of must be positive")
    M = scenario.num_elements
    if M == 0:
        sol = _allocate(scenario, None, power_method)
        return AlternatingResult(sol, PhaseVector(np.zeros(0, complex)), [RoundLog(1, sol.total_power, sol.feasible)])
    sol = phases = None
    draws = 0
    while draws < best_of or (not sol.feasible and draws < num_restarts):
        ph = PhaseVector.random(M, rng)
        cand = _allocate(scenario, ph, power_method)
        draws += 1
        if sol is None or (cand.feasible and (not sol.feasible or cand.total_power < sol.total_power)):
            sol, phases = cand, ph
    log = [RoundLog(1, sol.total_power, sol.feasible)]
    if not sol.feasible or phase_method == "random":
        return AlternatingResult(sol, phases, log)
    for r in range(2, max_rounds + 1):
        lp = build_lifted(scenario, sol)
        if phase_method == "dc":
            pr = solve_phase_dc(lp, **(dc_opts or {}))
        else:
            pr = solve_phase_sdr(lp, num_randomizations, rng=rng)
        cand = _allocate(scenario, pr.phases, power_method)
        ok = cand.feasible and cand.total_power < sol.total_power - power_tol
        if ok:
            sol, phases = cand, pr.phases
        log.append(RoundLog(r, sol.total_power, ok, pr.slack))
        if not ok:
            break
    return AlternatingResult(sol, phases, log)
