"""Low-rank interference alignment for wireless MapReduce shuffling.

Every (device, missing file) pair is a message. A message is sent jointly by all
devices that store its file; column ``col(j, m)`` of the transceiver matrix
``X`` holds the precoder of transmitter ``j`` for message ``m`` as seen through
a decoder. With ``X = U^H V`` (``r`` channel uses) the alignment conditions are
affine in ``X``:

* desired:       sum_{j in T(m)} h[k, j] X[row, col(j, m)] = 1   (row decodes m at k)
* interference:  same sum = 0   when receiver k does not store file(m)
* side information (k stores file(m)): no constraint.

Two decoder layouts are supported. ``"message"`` (default) gives every message
its own decoder row, so a device that wants several messages separates them
from each other as well. ``"receiver"`` gives every device a single decoder row
(``rows = K``), which can only deliver one combination per device.

Each matrix entry appears in at most one constraint, so projecting onto the
constraint set is closed form. Nuclear-norm and DC subproblems are solved with
ADMM built on :func:`edgeinfer.conic.svt`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conic.matrix import kyfan_subgradient, svt
from .errors import InconsistentRank, InfeasiblePlacement, InvalidArgument
from .scenario import (
    InterferenceChannel,
    Placement,
    PhaseVector,
    compose_irs_channel,
    gen_iid_channel,
    gen_shuffle_cascade,
    gen_uniform_placement,
)

DESIRED = "desired"
INTERFERENCE = "interference"

EPS_DC = 1e-4
MAX_DC_ITER = 50
RESTARTS = 1  # fresh random starts per rank before giving it up
TAU_RANK = 1e-3
RESIDUAL_TOL = 1e-5

# ------------------------------------------------------------------ messages


@dataclass(frozen=True)
class Message:
    dest: int
    file: int
    transmitters: tuple


@dataclass(frozen=True)
class MessageSet:
    placement: Placement
    messages: tuple
    columns: tuple  # (transmitter j, message index m) per column

    @property
    def num_columns(self):
        return len(self.columns)

    def col(self, j, m):
        return self._col_index[(j, m)]

    @property
    def _col_index(self):
        idx = self.__dict__.get("_idx")
        if idx is None:
            idx = {jm: c for c, jm in enumerate(self.columns)}
            object.__setattr__(self, "_idx", idx)
        return idx


def build_message_set(p: Placement):
    """One message per (device, file it does not store), sent by every holder of the file."""
    holders = [p.holders(n) for n in range(p.num_files)]
    for n, h in enumerate(holders):
        if not h:
            raise InfeasiblePlacement(f"file {n} is stored on no device")
    messages, columns = [], []
    for k, stored in enumerate(p.stores):
        for n in range(p.num_files):
            if n in stored:
                continue
            m = len(messages)
            messages.append(Message(k, n, holders[n]))
            columns.extend((j, m) for j in holders[n])
    return MessageSet(p, tuple(messages), tuple(columns))


# -------------------------------------------------------- affine rank problem


@dataclass(frozen=True)
class AlignmentConstraint:
    row: int
    receiver: int
    message: int
    kind: str
    coeffs: dict  # transmitter j -> h[k][j]
    rhs: complex


class AffineRankProblem:
    """Affine constraints on a rows x cols complex matrix; uncovered entries are free.

    Attributes
    ----------
    row_receiver : (rows,) int
        Device owning each decoder row.
    row_message : (rows,) int or None
        Message decoded by each row (``"message"`` layout only).
    """

    def __init__(self, ms: MessageSet, h: np.ndarray, decoders="message"):
        K = ms.placement.num_devices
        h = np.asarray(h, dtype=complex)
        if h.shape != (K, K):
            raise InvalidArgument(f"channel is {h.shape}, message set has {K} devices")
        if decoders not in ("message", "receiver"):
            raise InvalidArgument("decoders must be 'message' or 'receiver'")
        self.ms = ms
        self.decoders = decoders
        self.h = h
        stores = [set(s) for s in ms.placement.stores]
        if decoders == "message":
            self.row_receiver = np.array([msg.dest for msg in ms.messages], int)
            self.row_message = np.arange(len(ms.messages))
        else:
            self.row_receiver = np.arange(K)
            self.row_message = None
        self.shape = (self.row_receiver.size if ms.messages else 0, ms.num_columns)

        cons = []
        for row, k in enumerate(self.row_receiver):
            for m, msg in enumerate(ms.messages):
                if decoders == "message":
                    desired = m == row
                else:
                    desired = msg.dest == k
                if desired:
                    kind, rhs = DESIRED, 1.0
                elif msg.file not in stores[k]:
                    kind, rhs = INTERFERENCE, 0.0
                else:
                    continue
                coeffs = {j: h[k, j] for j in msg.transmitters}
                cons.append(AlignmentConstraint(row, int(k), m, kind, coeffs, rhs))
        self.constraints = tuple(cons)

        # flat arrays for residuals and projection
        rows, cols, coef, grp = [], [], [], []
        for g, c in enumerate(self.constraints):
            for j, a in c.coeffs.items():
                rows.append(c.row)
                cols.append(ms.col(j, c.message))
                coef.append(a)
                grp.append(g)
        self._rows = np.array(rows, int)
        self._cols = np.array(cols, int)
        self._flat = self._rows * max(self.shape[1], 1) + self._cols
        self._coef = np.array(coef, complex)
        self._grp = np.array(grp, int)
        self._rhs = np.array([c.rhs for c in self.constraints], complex)
        ng = len(self.constraints)
        self._norm2 = np.bincount(self._grp, np.abs(self._coef) ** 2, minlength=ng)
        free = np.ones(self.shape, bool)
        free[self._rows, self._cols] = False
        self.free_mask = free

    @property
    def num_constraints(self):
        return len(self.constraints)

    def _apply(self, X):
        prod = self._coef * X.ravel()[self._flat]
        ng = self.num_constraints
        return np.bincount(self._grp, prod.real, minlength=ng) + 1j * np.bincount(
            self._grp, prod.imag, minlength=ng
        )

    def residuals(self, X):
        """Per-constraint residual ``sum a x - rhs``."""
        return self._apply(X) - self._rhs

    def max_residual(self, X):
        if not self.num_constraints:
            return 0.0
        return float(np.max(np.abs(self.residuals(X))))

    def project(self, X):
        """Euclidean projection onto the affine constraint set."""
        if not self.num_constraints:
            return X.copy()
        r = self.residuals(X) / self._norm2
        out = np.array(X, dtype=complex, order="C")  # copy
        flat = out.ravel()
        flat[self._flat] -= self._coef.conj() * r[self._grp]
        return out

    def least_norm_point(self):
        return self.project(np.zeros(self.shape, complex))

    def scaled(self, c):
        """Same problem with every channel coefficient multiplied by ``c``."""
        return AffineRankProblem(self.ms, c * self.h, self.decoders)


def compile_alignment_constraints(ms: MessageSet, ch: InterferenceChannel, decoders="message"):
    h = ch.coeffs if isinstance(ch, InterferenceChannel) else np.asarray(ch)
    return AffineRankProblem(ms, h, decoders)


def min_rank_bound(prob: AffineRankProblem):
    """Lower bound on the rank of any feasible ``X`` (``message`` layout).

    Let ``d`` be the largest number of desired rows at one receiver. Those
    rows read ``d`` messages independently, so ``rank >= d``. At ``rank = d``
    the decoder block of such a receiver is invertible, hence every message
    of a file it lacks must arrive there with zero effective precoder
    ``sum_j h[k, j] v_{j,m}``. If, for some message, the channel submatrix from
    its transmitters to those receivers has full column rank, all of its
    precoders vanish and its own desired constraint fails; then
    ``rank >= d + 1``. The rank test is done on the actual coefficients.
    """
    if not prob.num_constraints:
        return 0
    if prob.decoders == "receiver":
        return 1
    K = prob.ms.placement.num_devices
    counts = np.bincount(prob.row_receiver, minlength=K)
    d = int(max(1, counts.max()))
    full = set(np.flatnonzero(counts == d).tolist())
    stores = [set(st) for st in prob.ms.placement.stores]
    for msg in prob.ms.messages:
        recv = [k for k in sorted(full) if k != msg.dest and msg.file not in stores[k]]
        T = list(msg.transmitters)
        if len(recv) < len(T):
            continue
        Hs = prob.h[np.ix_(recv, T)]
        sv = np.linalg.svd(Hs, compute_uv=False)
        if sv[-1] > 1e-8 * max(sv[0], 1e-300):
            return d + 1
    return d


# ------------------------------------------------------------ rank results


@dataclass
class RankSolution:
    X: np.ndarray
    rank: int
    max_residual: float
    algorithm: str
    ok: bool = True
    iterations: int = 0
    dc_objective: dict = field(default_factory=dict)  # rank -> final DC objective
    dc_steps: dict = field(default_factory=dict)  # rank -> outer DC steps taken
    message: str = ""

    @property
    def dof(self):
        """Per-message DoF ``1/rank`` (None when rank is 0 or the solve failed)."""
        if not self.ok or self.rank < 1:
            return None
        return Fraction(1, self.rank)


@dataclass
class TransceiverScheme:
    r: int
    U: np.ndarray  # (r, rows)
    V: np.ndarray  # (r, cols)


def effective_rank(X, tau_rank=TAU_RANK):
    """Number of singular values above ``tau_rank * sigma_1`` (0 for a ~zero matrix)."""
    X = np.asarray(X)
    if X.size == 0 or np.linalg.norm(X) <= 1e-9:
        return 0
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.count_nonzero(s > tau_rank * s[0]))


def _tail(X, r):
    s = np.linalg.svd(X, compute_uv=False)
    return float(np.sum(s[r:])), s


# ---------------------------------------------------------------- ADMM core


@dataclass
class _AdmmState:
    X: np.ndarray
    U: np.ndarray
    rho: float
    iters: int = 0


def _admm(prob, state, G=None, tol=1e-7, max_iter=5000, min_iter=1, mu=0.0):
    """ADMM for ``min ||Z||_* - Re<G, Z> + mu/2 ||Z - X_t||^2`` s.t. ``Z = X``, ``X`` feasible.

    ``X_t`` is the incoming ``state.X``. Updates ``state`` in place and
    returns whether the stopping test passed.
    """
    X, U, rho = state.X, state.U, state.rho
    anchor = X
    n = np.sqrt(X.size)
    fast = min(X.shape) * 4 <= max(X.shape)
    converged = False
    for it in range(1, max_iter + 1):
        W = rho * (X - U)
        if G is not None:
            W = W + G
        if mu:
            W = W + mu * anchor
        Z = svt(W / (rho + mu), 1.0 / (rho + mu), fast=fast)
        X_old = X
        X = prob.project(Z + U)
        U = U + Z - X
        r = np.linalg.norm(Z - X)
        s = rho * np.linalg.norm(X - X_old)
        state.iters += 1
        eps_p = tol * (n + max(np.linalg.norm(X), np.linalg.norm(Z)))
        eps_d = tol * (n + rho * np.linalg.norm(U))
        if it >= min_iter and r <= eps_p and s <= eps_d:
            converged = True
            break
        if it % 10 == 0:
            if r > 10 * s * (eps_p / eps_d):
                rho *= 2.0
                U = U / 2.0
            elif s > 10 * r * (eps_d / eps_p):
                rho /= 2.0
                U = U * 2.0
    state.X, state.U, state.rho = X, U, rho
    return converged


def _empty_solution(prob, algorithm):
    return RankSolution(np.zeros(prob.shape, complex), 0, 0.0, algorithm)


def _normalizer(prob):
    """Complex factor ``a`` such that ``prob.scaled(a)`` does not depend on a global channel scaling.

    The channel is scaled to unit RMS magnitude and rotated so that its first
    entry within half of the largest magnitude is real and positive. If ``X``
    solves the scaled problem then ``a X`` solves the original one.
    """
    h = prob.h
    mag = np.linalg.norm(h)
    if mag == 0:
        return 1.0
    ah = np.abs(h).ravel()
    i = int(np.argmax(ah > 0.5 * ah.max()))
    return np.sqrt(h.size) / mag * np.conj(h.flat[i] / ah[i])


def _rescaled(prob, sol, a):
    sol.X = a * sol.X
    sol.max_residual = prob.max_residual(sol.X)
    return sol


def solve_nuclear(prob: AffineRankProblem, tol=1e-7, max_iter=20000, tau_rank=TAU_RANK):
    """Minimum nuclear norm ``X`` subject to the alignment constraints.

    Solved on the scale-normalized channel (see :func:`_normalizer`).
    """
    if not prob.num_constraints:
        return _empty_solution(prob, "nuclear")
    a = _normalizer(prob)
    return _rescaled(prob, _solve_nuclear(prob.scaled(a), tol, max_iter, tau_rank), a)


def _solve_nuclear(prob, tol, max_iter, tau_rank):
    X0 = prob.least_norm_point()
    state = _AdmmState(X0, np.zeros_like(X0), 1.0)
    ok = _admm(prob, state, tol=tol, max_iter=max_iter)
    X = state.X
    res = prob.max_residual(X)
    sol = RankSolution(X, effective_rank(X, tau_rank), res, "nuclear", ok=ok, iterations=state.iters)
    if not ok:
        sol.message = "nuclear-norm ADMM hit the iteration cap"
    return sol


# ------------------------------------------------------------- DC + polish


class _FactorIndex:
    """Constraint layout grouped for batched alternating least squares.

    ``vgroups`` batch messages with equal (transmitter count, constraint
    count); ``ugroups`` batch decoder rows with equal constraint count,
    padding transmitter lists with zero coefficients.
    """

    def __init__(self, prob):
        ms = prob.ms
        by_msg, by_row = {}, {}
        for c in prob.constraints:
            by_msg.setdefault(c.message, []).append(c)
            by_row.setdefault(c.row, []).append(c)

        def coef(c):
            return [c.coeffs[j] for j in ms.messages[c.message].transmitters]

        def cols(m):
            return [ms.col(j, m) for j in ms.messages[m].transmitters]

        groups = {}
        for m, cl in by_msg.items():
            groups.setdefault((len(ms.messages[m].transmitters), len(cl)), []).append(m)
        self.vgroups = []
        for mlist in groups.values():
            self.vgroups.append(
                (
                    np.array([cols(m) for m in mlist]),  # (G, T)
                    np.array([[c.row for c in by_msg[m]] for m in mlist]),  # (G, n)
                    np.array([[coef(c) for c in by_msg[m]] for m in mlist]),  # (G, n, T)
                    np.array([[c.rhs for c in by_msg[m]] for m in mlist], complex),  # (G, n)
                )
            )
        groups = {}
        for row, cl in by_row.items():
            groups.setdefault(len(cl), []).append(row)
        self.ugroups = []
        for rlist in groups.values():
            # transmitter counts differ between messages: pad with zero coefficients
            T = max(len(ms.messages[c.message].transmitters) for r in rlist for c in by_row[r])

            def pad(vals, fill):
                return list(vals) + [fill] * (T - len(vals))

            self.ugroups.append(
                (
                    np.array(rlist),  # (G,)
                    np.array([[pad(cols(c.message), 0) for c in by_row[r]] for r in rlist]),  # (G, n, T)
                    np.array([[pad(coef(c), 0.0) for c in by_row[r]] for r in rlist], complex),  # (G, n, T)
                    np.array([[c.rhs for c in by_row[r]] for r in rlist], complex),  # (G, n)
                )
            )

    def v_step(self, U, V):
        r = U.shape[0]
        for cols, rows, a, rhs in self.vgroups:
            G, T = cols.shape
            Vm = V[:, cols].transpose(1, 0, 2).reshape(G, r * T)  # row-major vec of (r, T)
            Ur = U[:, rows].conj().transpose(1, 2, 0)  # (G, n, r)
            A = (Ur[..., :, None] * a[..., None, :]).reshape(G, rows.shape[1], r * T)
            res = rhs - np.einsum("gij,gj->gi", A, Vm)
            delta = np.einsum("gji,gi->gj", np.linalg.pinv(A), res)
            V[:, cols] = (Vm + delta).reshape(G, r, T).transpose(1, 0, 2)

    def u_step(self, U, V):
        for rows, cols, a, rhs in self.ugroups:
            S = np.einsum("rgnt,gnt->gnr", V[:, cols], a)  # s vectors per constraint
            B = S.conj()  # B u = conj(rhs)
            u = U[:, rows].T  # (G, r)
            res = rhs.conj() - np.einsum("gnr,gr->gn", B, u)
            delta = np.einsum("grn,gn->gr", np.linalg.pinv(B), res)
            U[:, rows] = (u + delta).T


def _polish(prob, X, r, max_iter=200, tol=1e-11, patience=15, index=None):
    """Exact rank-``r`` feasible point near ``X`` by alternating least squares.

    Starts from the truncated SVD ``X ~ U^H V`` and alternates minimum-change
    corrections of ``V`` (per message block) and ``U`` (per decoder row)
    that restore the constraints. Returns ``(U, V)`` or None on failure.
    """
    idx = _FactorIndex(prob) if index is None else index
    Us, s, Vh = np.linalg.svd(X, full_matrices=False)
    sq = np.sqrt(s[:r])
    U = (Us[:, :r] * sq).conj().T.copy()  # (r, rows)
    V = (sq[:, None] * Vh[:r]).copy()  # (r, cols)
    best = np.inf
    stall = 0
    for _ in range(max_iter):
        idx.v_step(U, V)
        idx.u_step(U, V)
        res = prob.max_residual(U.conj().T @ V)
        if res <= tol:
            return U, V
        if res > 0.9 * best:
            stall += 1
            if stall >= patience:
                break
        else:
            stall = 0
        best = min(best, res)
    return None


def solve_dc_rank(
    prob: AffineRankProblem,
    eps_dc=EPS_DC,
    max_dc_iter=MAX_DC_ITER,
    r_max=None,
    inner_iter=20,
    tol=1e-7,
    start=None,
    init="random",
    rng=None,
    stall_window=3,
    stall_ratio=0.99,
    polish_at=0.3,
    polish_on_entry=True,
    restarts=RESTARTS,
):
    """Smallest certified rank by the DC (nuclear minus Ky Fan) algorithm.

    Solved on the scale-normalized channel (see :func:`_normalizer`), so the
    certified rank does not change under a global channel scaling.

    For ``r`` starting at :func:`min_rank_bound`, repeatedly solve
    ``min ||X||_* - Re<G_t, X>`` with ``G_t`` the Ky Fan ``r`` subgradient at
    the previous iterate, warm-starting ADMM. When the tail ``sum_{i>r}
    sigma_i`` of a feasible iterate drops below ``eps_dc`` (or a rank-``r``
    polish succeeds, which makes the tail exactly zero) rank ``r`` is
    certified. A rank is abandoned after ``max_dc_iter`` outer steps, when the
    tail has not improved by 1% over ``stall_window`` steps, or when its
    average decrease over that window, continued linearly for the remaining
    steps, would still not reach ``eps_dc``. An abandoned rank is retried from
    ``restarts`` fresh random feasible points before moving to ``r + 1``.
    """
    if not prob.num_constraints:
        return _empty_solution(prob, "dc")
    a = _normalizer(prob)
    if start is not None:
        start = RankSolution(start.X / a, start.rank, start.max_residual, start.algorithm)
    opts = dict(eps_dc=eps_dc, max_dc_iter=max_dc_iter, r_max=r_max, inner_iter=inner_iter, tol=tol)
    opts.update(stall_window=stall_window, stall_ratio=stall_ratio, polish_at=polish_at, restarts=restarts)
    sol = _solve_dc_rank(prob.scaled(a), start=start, init=init, rng=rng, polish_on_entry=polish_on_entry, **opts)
    return _rescaled(prob, sol, a)


def _solve_dc_rank(
    prob,
    eps_dc,
    max_dc_iter,
    r_max,
    inner_iter,
    tol,
    start,
    init,
    rng,
    stall_window,
    stall_ratio,
    polish_at,
    polish_on_entry,
    restarts,
):
    rows, cols = prob.shape
    if r_max is None:
        r_max = min(rows, cols)
    r_max = min(int(r_max), rows, cols)
    if init not in ("random", "nuclear"):
        raise InvalidArgument("init must be 'random' or 'nuclear'")
    if restarts < 0:
        raise InvalidArgument("restarts must be nonnegative")
    rng = np.random.default_rng(0) if rng is None else rng

    def random_point():
        X0 = prob.least_norm_point()
        scale = np.linalg.norm(X0) / np.sqrt(X0.size)
        return prob.project(X0 + scale * (rng.standard_normal(X0.shape) + 1j * rng.standard_normal(X0.shape)))

    if init == "nuclear":
        X0 = (solve_nuclear(prob, tol=tol) if start is None else start).X.copy()
    else:
        X0 = random_point()
    state = _AdmmState(X0, np.zeros_like(X0), 1.0)
    history, steps = {}, {}
    total = 0
    r = min_rank_bound(prob)
    index = _FactorIndex(prob)
    while r <= r_max:
        if polish_on_entry and r > min_rank_bound(prob):
            fac = _polish(prob, state.X, r, index=index)
            if fac is not None:
                history[r], steps[r] = 0.0, 0
                return _certified(prob, fac[0].conj().T @ fac[1], r, history, total, steps)
        steps[r] = 0
        best_tail = np.inf
        for attempt in range(restarts + 1):
            if attempt:
                state = _AdmmState(random_point(), np.zeros_like(X0), 1.0)
            tails = []
            last_polish = np.inf
            for t in range(max_dc_iter):
                G = kyfan_subgradient(state.X, r)
                _admm(prob, state, G=G, tol=tol, max_iter=inner_iter)
                total += 1
                tail, s = _tail(state.X, r)
                tails.append(tail)
                steps[r] += 1
                if tail <= eps_dc:
                    history[r] = tail
                    # snap to an exactly rank-r feasible point so the factors reproduce X
                    fac = _polish(prob, state.X, r, index=index)
                    X = state.X if fac is None else fac[0].conj().T @ fac[1]
                    return _certified(prob, X, r, history, total, steps)
                if tail <= polish_at * last_polish and (tail <= 1e-2 * s[0] or t == max_dc_iter - 1):
                    last_polish = tail
                    fac = _polish(prob, state.X, r, index=index)
                    if fac is not None:
                        history[r] = 0.0
                        X = fac[0].conj().T @ fac[1]
                        return _certified(prob, X, r, history, total, steps)
                if len(tails) > stall_window:
                    rate = (tails[-1 - stall_window] - tails[-1]) / stall_window
                    remaining = max_dc_iter - len(tails)
                    if tails[-1] > stall_ratio * tails[-1 - stall_window] or tails[-1] - remaining * rate > eps_dc:
                        break
            best_tail = min(best_tail, tails[-1])
        history[r] = best_tail
        r += 1
    X = state.X
    return RankSolution(
        X,
        effective_rank(X),
        prob.max_residual(X),
        "dc",
        ok=False,
        iterations=total,
        dc_objective=history,
        dc_steps=steps,
        message=f"no rank <= {r_max} certified",
    )


def _certified(prob, X, r, history, total, steps):
    return RankSolution(
        X, r, prob.max_residual(X), "dc", ok=True, iterations=total, dc_objective=history, dc_steps=steps
    )


# ------------------------------------------------------------ transceivers


def recover_transceivers(sol: RankSolution, tol=1e-6):
    """Split ``X = U^H V`` with ``r = sol.rank`` rows each."""
    r = sol.rank
    if r < 1:
        raise InvalidArgument("rank-0 solution has no transceivers")
    Us, s, Vh = np.linalg.svd(sol.X, full_matrices=False)
    sq = np.sqrt(s[:r])
    U = (Us[:, :r] * sq).conj().T
    V = sq[:, None] * Vh[:r]
    err = float(np.max(np.abs(U.conj().T @ V - sol.X)))
    if err > tol:
        raise InconsistentRank(f"rank-{r} factors reproduce X only to {err:.3g}")
    return TransceiverScheme(r, U, V)


def simulate_delivery(prob: AffineRankProblem, scheme: TransceiverScheme, rng):
    """Noiseless end-to-end delivery with random symbols; returns the max decoding error.

    Transmitter ``j`` sends ``sum_m V[:, col(j, m)] s_m`` over ``r`` channel
    uses; receiver ``k`` hears ``sum_j h[k, j] x_j``, subtracts the
    contributions of messages whose files it stores, and applies decoder rows.
    Only meaningful for the ``message`` layout.
    """
    ms = prob.ms
    M = len(ms.messages)
    K = ms.placement.num_devices
    sym = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    r = scheme.r
    x = np.zeros((K, r), complex)
    for c, (j, m) in enumerate(ms.columns):
        x[j] += scheme.V[:, c] * sym[m]
    y = prob.h @ x  # (K, r)
    stores = [set(s) for s in ms.placement.stores]
    err = 0.0
    for row, k in enumerate(prob.row_receiver):
        u = scheme.U[:, row]
        est = u.conj() @ y[k]
        for m, msg in enumerate(ms.messages):
            if msg.file in stores[k]:
                known = sum(prob.h[k, j] * scheme.V[:, ms.col(j, m)] for j in msg.transmitters)
                est -= (u.conj() @ known) * sym[m]
        target = sym[prob.row_message[row]] if prob.row_message is not None else sym[
            [m for m, msg in enumerate(ms.messages) if msg.dest == k]
        ].sum()
        err = max(err, abs(est - target))
    return err


# ------------------------------------------------------------ DoF sweep


@dataclass
class DofTrial:
    K: int
    trial: int
    algorithm: str
    rank: int
    dof: float
    ok: bool
    iterations: int
    max_residual: float


def run_dof_trial(K, N_f, F, rng, irs_elements=0, irs_draws=1, beta=0.5, decoders="message", dc_opts=None):
    """One DoF trial: placement, channel (optionally IRS-composed), both solvers.

    With ``irs_elements > 0`` the channel is ``h + v^H a`` for the best of
    ``irs_draws`` random phase vectors, chosen by smallest DC-certified rank
    (earliest draw on ties). Returns ``(nuclear, dc)`` :class:`RankSolution`s.
    """
    dc_opts = dict(dc_opts or {})
    placement = gen_uniform_placement(K, N_f, F)
    ms = build_message_set(placement)
    ch = gen_iid_channel(K, rng)
    if irs_elements > 0:
        a = gen_shuffle_cascade(K, irs_elements, rng, beta)
        best = None
        for _ in range(max(1, irs_draws)):
            v = PhaseVector.random(irs_elements, rng)
            h = compose_irs_channel(ch.coeffs, a, v)
            prob = AffineRankProblem(ms, h, decoders)
            nuc = solve_nuclear(prob)
            dc = solve_dc_rank(prob, start=nuc, rng=rng, **dc_opts)
            key = dc.rank if dc.ok else np.inf
            if best is None or key < best[0]:
                best = (key, nuc, dc)
        return best[1], best[2]
    prob = AffineRankProblem(ms, ch.coeffs, decoders)
    nuc = solve_nuclear(prob)
    dc = solve_dc_rank(prob, start=nuc, rng=rng, **dc_opts)
    return nuc, dc
