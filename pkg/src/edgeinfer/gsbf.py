"""Group-sparse beamforming for cooperative in-edge inference.

AP ``n`` runs inference task ``k`` iff its beamformer ``w[n, k]`` is nonzero.
Total power is transmit power over the amplifier efficiency plus ``P_c`` per
active (AP, task) pair. Channels enter as ``h[n, k]`` (L-vectors) and user
``k`` receives ``sum_n h[n, k]^H x_n`` plus noise of power ``sigma^2``.

All conic programs are built on channels divided by ``sigma`` so that the
noise term is 1 and beamformer entries are O(sqrt(watts)).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .conic import SOC, ZERO, ComplexConicProgram, Cone, embed_complex, solve_conic
from .conic.program import ConicSolution
from .errors import InvalidArgument, SolveFailure
from .scenario import EdgeScenario

CONIC_TOL = 1e-9
SINR_TOL = 1e-6
POWER_TOL = 1e-8


@dataclass
class BeamformingProblem:
    """An edge scenario with composed channels and mixed-norm weights."""

    scenario: EdgeScenario
    channels: np.ndarray  # (N, K, L)
    weights: np.ndarray = None  # (N, K)

    def __post_init__(self):
        H = np.asarray(self.channels, dtype=complex)
        sc = self.scenario
        if H.shape != sc.direct.shape:
            raise InvalidArgument(f"channels {H.shape} do not match scenario {sc.direct.shape}")
        if not np.all(np.isfinite(H)):
            raise InvalidArgument("channels contain non-finite entries")
        self.channels = H
        if self.weights is None:
            self.weights = np.full(H.shape[:2], np.sqrt(sc.p_c))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != H.shape[:2] or np.any(self.weights < 0):
            raise InvalidArgument("weights must be a nonnegative (N, K) array")

    @classmethod
    def from_scenario(cls, scenario, phases=None, weights=None):
        return cls(scenario, scenario.effective_channels(phases), weights)

    @property
    def shape(self):
        return self.channels.shape

    @property
    def sigma(self):
        return float(np.sqrt(self.scenario.noise_power))


@dataclass
class BeamformingSolution:
    w: np.ndarray  # (N, K, L), exact zeros off the active set
    active: np.ndarray  # (N, K) bool
    feasible: bool
    per_ap_power: np.ndarray
    transmit_power: float
    compute_power: float
    total_power: float
    sinr: np.ndarray
    status: str = "optimal"
    iterations: int = 0
    method: str = ""
    log: list = field(default_factory=list)

    @property
    def num_active(self):
        return int(self.active.sum())


def sinr(channels, w, noise_power):
    """Achieved SINR per user for beamformers ``w[n, k]``."""
    H = np.asarray(channels)
    # g[k, j] = sum_n h[n, k]^H w[n, j]
    g = np.einsum("nkl,njl->kj", H.conj(), w)
    p = np.abs(g) ** 2
    sig = np.diag(p).copy()
    interf = p.sum(axis=1) - sig
    return sig / (interf + noise_power)


def total_power(sol_or_w, p_c, eta=1.0, active=None):
    """``sum ||w||^2 / eta + p_c * |active|`` in watts."""
    if isinstance(sol_or_w, BeamformingSolution):
        w, active = sol_or_w.w, sol_or_w.active
    else:
        w = np.asarray(sol_or_w)
        if active is None:
            active = np.linalg.norm(w, axis=-1) > 0
    return float(np.sum(np.abs(w) ** 2) / eta + p_c * np.count_nonzero(active))


def _finish(prob, w, active, method, status="optimal", iterations=0):
    sc = prob.scenario
    w = np.where(active[..., None], w, 0)
    # each user's stacked beamformer is rotated so that h_k^H w_k is real and nonnegative
    g = np.einsum("nkl,nkl->k", prob.channels.conj(), w)
    rot = np.where(np.abs(g) > 0, np.conj(g) / np.where(np.abs(g) > 0, np.abs(g), 1), 1)
    w = w * rot[None, :, None]
    per_ap = np.sum(np.abs(w) ** 2, axis=(1, 2))
    over = per_ap > sc.p_max
    if np.any(over):
        # solver-precision overshoot only: scale back onto the cap
        if np.any(per_ap[over] > sc.p_max * (1 + 1e-5)):
            raise SolveFailure(f"per-AP power {per_ap.max():.6g} exceeds budget {sc.p_max}")
        w[over] *= np.sqrt(sc.p_max / per_ap[over])[:, None, None]
        per_ap = np.sum(np.abs(w) ** 2, axis=(1, 2))
    s = sinr(prob.channels, w, sc.noise_power)
    tx = float(per_ap.sum())
    ok = bool(np.all(s >= sc.gamma * (1 - SINR_TOL)) and np.all(per_ap <= sc.p_max + POWER_TOL))
    comp = sc.p_c * int(active.sum())
    return BeamformingSolution(
        w=w,
        active=active.copy(),
        feasible=ok,
        per_ap_power=per_ap,
        transmit_power=tx,
        compute_power=comp,
        total_power=tx / sc.eta + comp,
        sinr=s,
        status=status if ok else "sinr_check_failed",
        iterations=iterations,
        method=method,
    )


def _infeasible(prob, active, status, method, iterations=0):
    N, K, L = prob.shape
    return BeamformingSolution(
        w=np.zeros((N, K, L), complex),
        active=active.copy(),
        feasible=False,
        per_ap_power=np.zeros(N),
        transmit_power=np.inf,
        compute_power=prob.scenario.p_c * int(active.sum()),
        total_power=np.inf,
        sinr=np.zeros(K),
        status=status,
        iterations=iterations,
        method=method,
    )


# --------------------------------------------------------------- conic forms


class _Layout:
    """Complex variable layout: beamformers of active pairs, then real extras."""

    def __init__(self, active, L, n_real):
        self.pairs = [(n, k) for k in range(active.shape[1]) for n in range(active.shape[0]) if active[n, k]]
        self.base = {pk: i * L for i, pk in enumerate(self.pairs)}
        self.L = L
        self.nw = len(self.pairs) * L
        self.n_real = n_real
        self.dim = self.nw + n_real

    def real_vars(self):
        rv = np.zeros(self.dim, bool)
        rv[self.nw :] = True
        return rv

    def unpack(self, z, shape):
        w = np.zeros(shape, complex)
        for (n, k), b in self.base.items():
            w[n, k] = z[b : b + self.L]
        return w


def _constraint_blocks(prob, active, lay):
    """SINR (SOC + real-signal equality) and per-AP cap blocks."""
    N, K, L = prob.shape
    Ht = prob.channels / prob.sigma
    gamma = prob.scenario.gamma
    blocks = []
    for k in range(K):
        q = K + 1
        rows, cols, vals = [], [], []
        im_cols, im_vals = [], []
        for n in range(N):
            if not active[n, k]:
                continue
            b = lay.base[(n, k)]
            c = Ht[n, k].conj()
            rows += [0] * L
            cols += list(range(b, b + L))
            vals += list(-c / np.sqrt(gamma[k]))
            im_cols += list(range(b, b + L))
            im_vals += list(1j * c)
        row = 1
        for j in range(K):
            if j == k:
                continue
            for n in range(N):
                if active[n, j]:
                    b = lay.base[(n, j)]
                    rows += [row] * L
                    cols += list(range(b, b + L))
                    vals += list(-Ht[n, k].conj())
            row += 1
        A = sp.csr_matrix((vals, (rows, cols)), shape=(q, lay.dim))
        rhs = np.zeros(q, complex)
        rhs[-1] = 1.0
        blocks.append((A, rhs, Cone(SOC, q)))
        Aim = sp.csr_matrix((im_vals, ([0] * len(im_cols), im_cols)), shape=(1, lay.dim))
        blocks.append((Aim, np.zeros(1), Cone(ZERO, 1), "re"))
    for n in range(N):
        ks = [k for k in range(K) if active[n, k]]
        if not ks:
            continue
        q = 1 + L * len(ks)
        cols = [c for k in ks for c in range(lay.base[(n, k)], lay.base[(n, k)] + L)]
        A = sp.csr_matrix((-np.ones(len(cols)), (np.arange(1, q), cols)), shape=(q, lay.dim))
        rhs = np.zeros(q, complex)
        rhs[0] = np.sqrt(prob.scenario.p_max)
        blocks.append((A, rhs, Cone(SOC, q)))
    return blocks


def _check_active(prob, active):
    active = np.asarray(active, dtype=bool)
    if active.shape != prob.shape[:2]:
        raise InvalidArgument(f"active set must be {prob.shape[:2]}")
    return active


def compile_power_min(prob: BeamformingProblem, active):
    """SOCP ``min u`` s.t. SINR cones, per-AP caps, ``||w|| <= u``.

    Returns ``(ConicProgram, ComplexConicProgram, layout)`` or None when some
    user has no serving AP.
    """
    active = _check_active(prob, active)
    if not np.all(active.any(axis=0)):
        return None
    N, K, L = prob.shape
    lay = _Layout(active, L, 1)
    blocks = _constraint_blocks(prob, active, lay)
    q = 1 + lay.nw
    cols = [lay.nw] + list(range(lay.nw))
    A = sp.csr_matrix((-np.ones(q), (np.arange(q), cols)), shape=(q, lay.dim))
    blocks.append((A, np.zeros(q), Cone(SOC, q)))
    c = np.zeros(lay.dim)
    c[lay.nw] = 1.0
    cp = ComplexConicProgram(c, blocks, real_vars=lay.real_vars())
    return embed_complex(cp), cp, lay


def _solve_compiled(prob, active, compiled, method, tol):
    program, cp, lay = compiled
    res = solve_conic(program, tol=tol)
    if res.status == ConicSolution.PRIMAL_INFEASIBLE:
        return None, res
    if not res.optimal:
        raise SolveFailure(f"power minimization solver ended with status {res.status}")
    w = lay.unpack(cp.recover(res.x), prob.shape)
    refit = _refit_powers(prob, w)
    return (w if refit is None else refit), res


# ------------------------------------------------------------ duality path


def _duality_power_min(prob, active, tol=1e-10, max_iter=2000):
    """Uplink-downlink duality fixed point without per-AP caps.

    Returns beamformers or None when the iteration does not converge (SINR
    targets infeasible or too slow).
    """
    N, K, L = prob.shape
    Ht = prob.channels / prob.sigma
    gamma = prob.scenario.gamma
    h = Ht.transpose(1, 0, 2).reshape(K, N * L)  # stacked channel of user k over all APs
    mask = np.repeat(active.T, L, axis=1).astype(float)  # (K, N*L) support of user k's beamformer
    # user k solves with Sigma restricted to its support, padded by identity off it
    outer = mask[:, :, None] * mask[:, None, :]
    pad = np.eye(N * L)[None] * (1.0 - mask)[:, :, None]
    hm = h * mask
    lam = np.zeros(K)
    for _ in range(max_iter):
        Sigma = np.eye(N * L) + (h.T * lam) @ h.conj()
        x = np.linalg.solve(outer * Sigma[None] + pad, hm[..., None])[..., 0]
        val = np.real(np.sum(hm.conj() * x, axis=1))
        new = gamma / ((1 + gamma) * val)
        if not np.all(np.isfinite(new)) or new.max() > 1e12:
            return None
        done = np.max(np.abs(new - lam)) <= tol * max(1.0, new.max())
        lam = new
        if done:
            break
    else:
        return None
    dirs = x / np.linalg.norm(x, axis=1, keepdims=True)
    W = dirs.reshape(K, N, L).transpose(1, 0, 2)
    return _refit_powers(prob, W)


def _refit_powers(prob, w):
    """Rescale each user's beamformer so that every SINR holds with equality.

    Keeps the directions of ``w`` and solves the linear SINR-equality system
    for the powers. At a power-minimizing point all SINR constraints are
    tight, so this only removes solver round-off. Returns None when the
    system has no nonnegative solution.
    """
    N, K, L = prob.shape
    Ht = prob.channels / prob.sigma
    gamma = prob.scenario.gamma
    norms = np.sqrt(np.sum(np.abs(w) ** 2, axis=(0, 2)))
    if np.any(norms == 0):
        return None
    u = w / norms[None, :, None]
    g = np.abs(np.einsum("nkl,njl->kj", Ht.conj(), u)) ** 2  # g[k, j] = |h_k^H u_j|^2
    A = -g.copy()
    A[np.diag_indices(K)] = np.diag(g) / gamma
    try:
        p = np.linalg.solve(A, np.ones(K))
    except np.linalg.LinAlgError:
        return None
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        return None
    return u * np.sqrt(p)[None, :, None]


def solve_power_min(prob: BeamformingProblem, active=None, method="auto", tol=CONIC_TOL):
    """Minimum transmit power on a fixed support.

    ``method="auto"`` first tries the duality fixed point (exact when no
    per-AP cap binds) and falls back to the SOCP otherwise; ``"conic"``
    always solves the SOCP.
    """
    if active is None:
        active = np.ones(prob.shape[:2], bool)
    active = _check_active(prob, active)
    if not np.all(active.any(axis=0)):
        return _infeasible(prob, active, "no_serving_ap", method)
    if method not in ("auto", "conic", "duality"):
        raise InvalidArgument("method must be 'auto', 'conic' or 'duality'")
    if method in ("auto", "duality"):
        w = _duality_power_min(prob, active)
        if w is not None:
            per_ap = np.sum(np.abs(w) ** 2, axis=(1, 2))
            if np.all(per_ap <= prob.scenario.p_max):
                sol = _finish(prob, w, active, "duality")
                if sol.feasible:
                    return sol
        if method == "duality":
            return _infeasible(prob, active, "duality_failed", method)
    compiled = compile_power_min(prob, active)
    w, res = _solve_compiled(prob, active, compiled, "conic", tol)
    if w is None:
        return _infeasible(prob, active, "infeasible", "conic", res.iterations)
    return _finish(prob, w, active, "conic", iterations=res.iterations)


# ----------------------------------------------------------- group sparsity


def compile_l12(prob: BeamformingProblem):
    """SOCP ``min sum rho[n,k] t[n,k]`` s.t. ``||w[n,k]|| <= t[n,k]``, SINR, caps."""
    N, K, L = prob.shape
    active = np.ones((N, K), bool)
    lay = _Layout(active, L, N * K)
    blocks = _constraint_blocks(prob, active, lay)
    c = np.zeros(lay.dim)
    for i, (n, k) in enumerate(lay.pairs):
        tcol = lay.nw + i
        b = lay.base[(n, k)]
        cols = [tcol] + list(range(b, b + L))
        A = sp.csr_matrix((-np.ones(L + 1), (np.arange(L + 1), cols)), shape=(L + 1, lay.dim))
        blocks.append((A, np.zeros(L + 1), Cone(SOC, L + 1)))
        c[tcol] = prob.weights[n, k]
    cp = ComplexConicProgram(c, blocks, real_vars=lay.real_vars())
    return embed_complex(cp), cp, lay


def solve_l12_stage(prob: BeamformingProblem, tol=CONIC_TOL):
    """Weighted mixed l1,2 minimization over the full support."""
    N, K, L = prob.shape
    active = np.ones((N, K), bool)
    w, res = _solve_compiled(prob, active, compile_l12(prob), "l12", tol)
    if w is None:
        return _infeasible(prob, active, "infeasible", "l12", res.iterations)
    return _finish(prob, w, active, "l12", iterations=res.iterations)


def deactivation_order(norms, K):
    """Pairs sorted by ascending stage-1 group norm (ties by AP then user index)."""
    N = norms.shape[0]
    flat = [(norms[n, k], n, k) for n in range(N) for k in range(K)]
    flat.sort(key=lambda t: (t[0], t[1], t[2]))
    return [(n, k) for _, n, k in flat]


def support_sequence(order, N, K):
    """Nested supports S_0 ⊃ S_1 ⊃ ... obtained by switching pairs off in ``order``.

    A pair is skipped when switching it off would leave its user unserved.
    """
    active = np.ones((N, K), bool)
    seq = [active.copy()]
    for n, k in order:
        if active[:, k].sum() <= 1:
            continue
        active[n, k] = False
        seq.append(active.copy())
    return seq


def group_sparse_allocate(prob: BeamformingProblem, method="auto", tol=CONIC_TOL):
    """Two-stage group-sparse beamforming: mixed-norm ranking, then support scan.

    Stage 1 ranks (AP, task) pairs by their mixed-norm group norms. Stage 2
    considers the nested supports that switch off the J weakest pairs and
    returns the feasible one with least total power, scanning J upward until
    the first infeasible support. Feasibility is monotone along the nested
    sequence and transmit power is nondecreasing in J, so the first
    infeasible J is located by bisection and candidates whose lower bound
    ``transmit(J') + P_c |S_J|`` (J' <= J already solved) exceeds the
    incumbent are skipped; the result equals the plain linear scan.
    """
    sc = prob.scenario
    N, K, L = prob.shape
    stage1 = solve_l12_stage(prob, tol=tol)
    if not stage1.feasible:
        out = _infeasible(prob, np.ones((N, K), bool), stage1.status, "gsbf", stage1.iterations)
        out.log.append(("stage1", stage1.status))
        return out
    norms = np.linalg.norm(stage1.w, axis=-1)
    seq = support_sequence(deactivation_order(norms, K), N, K)
    cache = {}

    def solve(J):
        if J not in cache:
            cache[J] = solve_power_min(prob, seq[J], method=method, tol=tol)
        return cache[J]

    if not solve(0).feasible:
        out = _infeasible(prob, seq[0], "infeasible", "gsbf")
        out.log.append(("J0", "infeasible"))
        return out
    lo, hi = 0, len(seq)  # seq[lo] feasible; first infeasible index in (lo, hi]
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if solve(mid).feasible:
            lo = mid
        else:
            hi = mid
    last = lo  # largest J before the first infeasible support

    def total(J):
        return solve(J).transmit_power / sc.eta + sc.p_c * int(seq[J].sum())

    best_J, best = last, total(last)
    for J in range(last - 1, -1, -1):
        known = [j for j in cache if j <= J and cache[j].feasible]
        tx_lb = max(cache[j].transmit_power for j in known) if known else 0.0
        if tx_lb / sc.eta + sc.p_c * int(seq[J].sum()) > best:
            continue
        t = total(J)
        if t <= best:
            best_J, best = J, t
    sol = solve(best_J)
    out = BeamformingSolution(**{**sol.__dict__, "log": []})
    out.method = "gsbf"
    out.log = [("stage1_norms", norms), ("scanned", sorted(cache)), ("first_infeasible", hi), ("chosen", best_J)]
    return out
