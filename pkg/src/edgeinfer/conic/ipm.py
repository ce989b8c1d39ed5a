"""Primal-dual interior-point method for LP/SOCP/SDP in homogeneous form.

The iteration is the Nesterov-Todd scaled, Mehrotra predictor-corrector
scheme on the self-dual embedding

    0 = A'y + G'z + c tau
    0 = -A x + b tau
    s = -G x + h tau
    kappa = -c'x - b'y - h'z

with ``s, z`` in the cone and ``tau, kappa >= 0``.  Equality blocks of the
program become ``A x = b``; all other blocks become ``G x + s = h``.
Infeasibility is reported from the embedding certificates.

The NT scaling is recomputed from ``(s, z)`` at every iteration.  Newton
systems are reduced to the normal matrix ``G' W^-1 W^-T G`` bordered by the
equality constraints and solved with a dense LU factorization plus a few
rounds of iterative refinement.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .program import NONNEG, PSD, SOC, ZERO, ConicSolution, residuals, smat, svec, _svec_layout


class _Space:
    """Cone bookkeeping for the stacked vector [nonneg | soc ... | psd ...]."""

    def __init__(self, l, q, s):
        self.l = int(l)
        self.q = [int(v) for v in q]
        self.s = [int(v) for v in s]
        off = self.l
        self.qsl = []
        for d in self.q:
            self.qsl.append(slice(off, off + d))
            off += d
        self.ssl = []
        for p in self.s:
            n = p * (p + 1) // 2
            self.ssl.append(slice(off, off + n))
            off += n
        self.m = off
        nq = sum(self.q)
        self.qr = slice(self.l, self.l + nq)
        self.qhead = np.concatenate([[0], np.cumsum(self.q)[:-1]]).astype(int) if self.q else np.zeros(0, int)
        self.qseg = np.repeat(np.arange(len(self.q)), self.q)
        self.qtail = np.ones(nq)
        self.qtail[self.qhead] = 0.0
        self.qsign = 1.0 - 2.0 * self.qtail  # +1 on heads, -1 on tails
        self.degree = self.l + len(self.q) + sum(self.s)
        self.sdiag = [np.flatnonzero(_svec_layout(p)[0] == _svec_layout(p)[1]) for p in self.s]

    def segsum(self, v):
        """Per-SOC-block sums of a region vector (or of the rows of a matrix)."""
        return np.add.reduceat(v, self.qhead, axis=0)

    def expand(self, per_block, like):
        """Broadcast per-block values to the SOC region, matching ``like``'s rank."""
        out = per_block[self.qseg]
        return out[:, None] if like.ndim == 2 else out

    def identity(self):
        e = np.zeros(self.m)
        e[: self.l] = 1.0
        for sl in self.qsl:
            e[sl.start] = 1.0
        for sl, idx in zip(self.ssl, self.sdiag):
            e[sl.start + idx] = 1.0
        return e

    def min_eig(self, u):
        """Smallest 'eigenvalue' of u over all cones (+inf when there are none)."""
        vals = [np.inf]
        if self.l:
            vals.append(np.min(u[: self.l]))
        if self.q:
            uq = u[self.qr]
            vals.append(np.min(uq[self.qhead] - np.sqrt(self.segsum(self.qtail * uq * uq))))
        for sl, p in zip(self.ssl, self.s):
            vals.append(np.linalg.eigvalsh(smat(u[sl], p))[0])
        return min(vals)


class _Scaling:
    """Nesterov-Todd scaling W with W z = W^-T s = lam."""

    def __init__(self, space, s, z):
        self.space = space
        sp_ = space
        lam = np.zeros(sp_.m)
        self.d = None
        if sp_.l:
            sl, zl = s[: sp_.l], z[: sp_.l]
            self.d = np.sqrt(sl / zl)
            lam[: sp_.l] = np.sqrt(sl * zl)
        if sp_.q:
            sv, zv = s[sp_.qr], z[sp_.qr]
            sn = _jnorm_vec(sp_, sv)
            zn = _jnorm_vec(sp_, zv)
            sb = sv / sn[sp_.qseg]
            zb = zv / zn[sp_.qseg]
            gamma = np.sqrt(0.5 * (1.0 + sp_.segsum(sb * zb)))
            self.qwv = (sb + sp_.qsign * zb) / (2.0 * gamma[sp_.qseg])
            self.qeta = np.sqrt(sn / zn)
            lam[sp_.qr] = self._soc(zv)
        else:
            self.qwv = np.zeros(0)
            self.qeta = np.zeros(0)
        self.r = []
        self.rinv = []
        self.slam = []
        for sl, p in zip(sp_.ssl, sp_.s):
            S = smat(s[sl], p)
            Z = smat(z[sl], p)
            Ls = _sqrtm_psd(S)
            Lz = _sqrtm_psd(Z)
            U, lv, Vt = np.linalg.svd(Lz @ Ls)
            r = Ls @ Vt.T / np.sqrt(lv)
            self.r.append(r)
            self.rinv.append(np.linalg.inv(r))
            self.slam.append(lv)
            lam[sl] = svec(np.diag(lv))
        self.lam = lam

    @property
    def qw(self):
        sp_ = self.space
        return [(eta, self.qwv[sl.start - sp_.l : sl.stop - sp_.l]) for sl, eta in zip(sp_.qsl, self.qeta)]

    def _soc(self, u, inverse=False):
        """eta * H_w u on the whole SOC region; W^-1 = (1/eta) J H_w J."""
        sp_ = self.space
        w = self.qwv
        eta = self.qeta
        if inverse:
            u = u * (sp_.qsign[:, None] if u.ndim == 2 else sp_.qsign)
            eta = 1.0 / eta
        tw = w * sp_.qtail
        tw = tw[:, None] if u.ndim == 2 else tw
        w0 = w[sp_.qhead]
        u0 = u[sp_.qhead]
        a = sp_.segsum(tw * u)
        w0b = w0[:, None] if u.ndim == 2 else w0
        coef = u0 + a / (1.0 + w0b)
        out = u + tw * coef[sp_.qseg]
        out[sp_.qhead] = w0b * u0 + a
        out *= sp_.expand(eta, u)
        if inverse:
            out *= sp_.qsign[:, None] if u.ndim == 2 else sp_.qsign
        return out

    # W, W', W^-1, W^-T acting on stacked vectors --------------------------------
    def apply(self, u, inverse=False, transpose=False):
        sp_ = self.space
        out = np.empty_like(u)
        if sp_.l:
            out[: sp_.l] = u[: sp_.l] / self.d if inverse else u[: sp_.l] * self.d
        if sp_.q:
            out[sp_.qr] = self._soc(u[sp_.qr], inverse)
        for sl, p, r, ri in zip(sp_.ssl, sp_.s, self.r, self.rinv):
            U = smat(u[sl], p)
            if not inverse and not transpose:
                V = r.T @ U @ r
            elif not inverse and transpose:
                V = r @ U @ r.T
            elif inverse and not transpose:
                V = ri.T @ U @ ri
            else:
                V = ri @ U @ ri.T
            out[sl] = svec(V)
        return out

    def scaled_columns(self, G):
        """W^-T G for a dense (m, n) matrix."""
        sp_ = self.space
        out = np.empty_like(G)
        if sp_.l:
            out[: sp_.l] = G[: sp_.l] / self.d[:, None]
        if sp_.q:
            out[sp_.qr] = self._soc(G[sp_.qr], inverse=True)
        for sl, p, ri in zip(sp_.ssl, sp_.s, self.rinv):
            mats = smat(G[sl].T, p)
            out[sl] = svec(ri @ mats @ ri.T).T
        return out


def _jnorm_vec(space, v):
    t = v[space.qhead]
    nu = np.sqrt(space.segsum(space.qtail * v * v))
    return np.sqrt(np.maximum((t - nu) * (t + nu), 1e-300))


def _sqrtm_psd(S):
    lam, U = np.linalg.eigh(S)
    lam = np.maximum(lam, 1e-300)
    return (U * np.sqrt(lam)) @ U.T


# Jordan algebra on scaled points ----------------------------------------------


def _sprod(space, lam_or_u, v, lam_diag=None):
    """Jordan product u o v on stacked vectors."""
    out = np.empty_like(v)
    u = lam_or_u
    if space.l:
        out[: space.l] = u[: space.l] * v[: space.l]
    if space.q:
        uq, vq = u[space.qr], v[space.qr]
        h = space.qhead
        oq = uq[h][space.qseg] * vq + vq[h][space.qseg] * uq
        oq[h] = space.segsum(uq * vq)
        out[space.qr] = oq
    for k, (sl, p) in enumerate(zip(space.ssl, space.s)):
        U = smat(u[sl], p)
        V = smat(v[sl], p)
        P = U @ V
        out[sl] = svec(0.5 * (P + P.T))
    return out


def _sinv(space, lam, slam, u):
    """Solve lam o x = u for x, with lam a scaled (NT) point."""
    out = np.empty_like(u)
    if space.l:
        out[: space.l] = u[: space.l] / lam[: space.l]
    if space.q:
        lq, uq = lam[space.qr], u[space.qr]
        h, seg, tail = space.qhead, space.qseg, space.qtail
        l0 = lq[h]
        nl = np.sqrt(space.segsum(tail * lq * lq))
        det = (l0 - nl) * (l0 + nl)
        x0 = (l0 * uq[h] - space.segsum(tail * lq * uq)) / det
        oq = (uq - x0[seg] * lq) / l0[seg]
        oq[h] = x0
        out[space.qr] = oq
    for sl, p, lv in zip(space.ssl, space.s, slam):
        rows, cols, _ = _svec_layout(p)
        out[sl] = u[sl] / (0.5 * (lv[rows] + lv[cols]))
    return out


def _max_step(space, lam, slam, x):
    """Largest alpha with lam + alpha x in the cone (inf if unbounded)."""
    amax = np.inf
    if space.l:
        xl = x[: space.l]
        neg = xl < 0
        if np.any(neg):
            amax = min(amax, np.min(-lam[: space.l][neg] / xl[neg]))
    if space.q:
        lq, xq = lam[space.qr], x[space.qr]
        h, tail = space.qhead, space.qtail
        l0, x0 = lq[h], xq[h]
        a = x0 * x0 - space.segsum(tail * xq * xq)
        b = l0 * x0 - space.segsum(tail * lq * xq)
        nl = np.sqrt(space.segsum(tail * lq * lq))
        c = (l0 - nl) * (l0 + nl)
        hit = (a < 0) | (x0 < 0)
        if np.any(hit):
            den = np.sqrt(np.maximum(b[hit] ** 2 - a[hit] * c[hit], 0.0)) - b[hit]
            if np.any(den <= 0):
                amax = 0.0
            else:
                amax = min(amax, np.min(c[hit] / den))
    for sl, p, lv in zip(space.ssl, space.s, slam):
        X = smat(x[sl], p)
        isq = 1.0 / np.sqrt(lv)
        ev = np.linalg.eigvalsh(X * np.outer(isq, isq))[0]
        if ev < 0:
            amax = min(amax, -1.0 / ev)
    return amax


# main entry -------------------------------------------------------------------


def _split(program):
    """Reorder blocks into (equalities, nonneg, soc, psd) dense matrices."""
    eq_A, eq_b = [], []
    l_A, l_b = [], []
    q_A, q_b, q_dims = [], [], []
    s_A, s_b, s_dims = [], [], []
    order = []  # (kind, index within its group) per original block
    for blk in program.blocks:
        kind = blk.cone.kind
        A = blk.A.toarray()
        if kind == ZERO:
            order.append((ZERO, len(eq_A)))
            eq_A.append(A)
            eq_b.append(blk.b)
        elif kind == NONNEG:
            order.append((NONNEG, len(l_A)))
            l_A.append(A)
            l_b.append(blk.b)
        elif kind == SOC:
            order.append((SOC, len(q_A)))
            q_A.append(A)
            q_b.append(blk.b)
            q_dims.append(blk.cone.dim)
        else:
            order.append((PSD, len(s_A)))
            s_A.append(A)
            s_b.append(blk.b)
            s_dims.append(blk.cone.dim)
    n = program.dimension

    def cat(mats, vecs):
        if not mats:
            return np.zeros((0, n)), np.zeros(0)
        return np.vstack(mats), np.concatenate(vecs)

    Aeq, beq = cat(eq_A, eq_b)
    G, h = cat(l_A + q_A + s_A, l_b + q_b + s_b)
    l_sizes = [a.shape[0] for a in l_A]
    eq_sizes = [a.shape[0] for a in eq_A]
    return Aeq, beq, G, h, sum(l_sizes), q_dims, s_dims, order, eq_sizes, l_sizes


class _KKT:
    """Factorized reduced KKT system for a fixed scaling."""

    def __init__(self, G, Aeq, scaling, soc_cache=None, reg=1e-13):
        self.G = G
        self.A = Aeq
        self.W = scaling
        n = G.shape[1]
        p = Aeq.shape[0]
        space = scaling.space
        if soc_cache is None:
            Gs = scaling.scaled_columns(G)
            H = Gs.T @ Gs
        else:
            H = np.zeros((n, n))
            if space.l:
                Gl = G[: space.l] / scaling.d[:, None]
                H += Gl.T @ Gl
            if space.q:
                # sum_b G_b' W_b^-2 G_b with W_b^-2 = (2 J w w' J - J) / eta_b^2
                Gq, heads, tails = soc_cache
                inv2 = 1.0 / scaling.qeta**2
                P = space.segsum(Gq * (space.qsign * scaling.qwv)[:, None])  # rows: (J w_b)' G_b
                G0 = Gq[heads]
                G1 = Gq[tails]
                H += (P.T * (2.0 * inv2)) @ P - (G0.T * inv2) @ G0 + (G1.T * inv2[space.qseg[tails]]) @ G1
            for sl, p_, ri in zip(space.ssl, space.s, scaling.rinv):
                mats = smat(G[sl].T, p_)
                Gs = svec(ri @ mats @ ri.T)
                H += Gs @ Gs.T
        self.H = H
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H
        K[:n, n:] = Aeq.T
        K[n:, :n] = Aeq
        self.K = K
        scale = max(1.0, np.max(np.abs(np.diag(H)))) if n else 1.0
        Kreg = K.copy()
        Kreg[np.arange(n), np.arange(n)] += reg * scale
        if p:
            Kreg[np.arange(n, n + p), np.arange(n, n + p)] -= reg * scale
        self.lu = la.lu_factor(Kreg, check_finite=False)
        self.n = n

    def _reduced(self, bx, by, bz):
        W = self.W
        wbz = W.apply(bz, inverse=True, transpose=True)
        rhs = np.concatenate([bx + self.G.T @ W.apply(wbz, inverse=True), by])
        sol = la.lu_solve(self.lu, rhs, check_finite=False)
        res = rhs - self.K @ sol
        sol += la.lu_solve(self.lu, res, check_finite=False)
        x = sol[: self.n]
        y = sol[self.n :]
        wz = W.apply(self.G @ x - bz, inverse=True, transpose=True)
        z = W.apply(wz, inverse=True)
        return x, y, z

    def solve(self, bx, by, bz, refine=2):
        """Solve [0 A' G'; A 0 0; G 0 -W'W] [x; y; z] = [bx; by; bz].

        Returns x, y, z and the scaled ``W z``.
        """
        W = self.W
        x, y, z = self._reduced(bx, by, bz)
        for _ in range(refine):
            wz = W.apply(z)
            r1 = bx - self.A.T @ y - self.G.T @ z
            r2 = by - self.A @ x
            r3 = bz - self.G @ x + W.apply(wz, transpose=True)
            nres = max(np.linalg.norm(r1), np.linalg.norm(r2), np.linalg.norm(r3))
            if nres <= 1e-14 * (1.0 + max(np.linalg.norm(bx), np.linalg.norm(by), np.linalg.norm(bz))):
                break
            dx, dy, dz = self._reduced(r1, r2, r3)
            x, y, z = x + dx, y + dy, z + dz
        return x, y, z, W.apply(z)


def solve_ipm(program, tol=1e-8, max_iter=100, step=0.99, reduced_tol=None):
    """Solve ``program`` to relative tolerance ``tol``.

    When the iteration stalls from round-off before reaching ``tol``, the best
    iterate is returned as ``optimal_inaccurate`` (or the best certificate as
    infeasible) if it meets ``reduced_tol`` (default ``max(1e3 tol, 1e-6)``).
    """
    if reduced_tol is None:
        reduced_tol = max(1e3 * tol, 1e-6)
    Aeq, beq, G, h, l, q_dims, s_dims, order, eq_sizes, l_sizes = _split(program)
    n = program.dimension
    c = program.c
    space = _Space(l, q_dims, s_dims)
    e = space.identity()

    Gq = G[space.qr]
    soc_cache = (Gq, space.qhead, np.flatnonzero(space.qtail))

    def kkt(scaling):
        return _KKT(G, Aeq, scaling, soc_cache)

    # starting point: least-norm primal/dual with W = I -------------------------
    unit = _Scaling(space, e, e)
    K0 = kkt(unit)
    x, y, z, _ = K0.solve(np.zeros(n), beq, h)
    s = -z
    x1, y1, z1, _ = K0.solve(-c, np.zeros(beq.size), np.zeros(space.m))
    y, z = y1, z1
    nrms = np.linalg.norm(s)
    ts = space.min_eig(s)
    if ts <= 1e-8 * max(nrms, 1.0):
        s = s + (1.0 - ts) * e if np.isfinite(ts) else s
    nrmz = np.linalg.norm(z)
    tz = space.min_eig(z)
    if tz <= 1e-8 * max(nrmz, 1.0):
        z = z + (1.0 - tz) * e if np.isfinite(tz) else z
    tau, kappa = 1.0, 1.0

    resx0 = max(1.0, np.linalg.norm(c))
    resy0 = max(1.0, np.linalg.norm(beq))
    resz0 = max(1.0, np.linalg.norm(h))
    status = ConicSolution.MAX_ITER
    best = (np.inf, None)
    best_cert = (np.inf, None)
    it = 0
    for it in range(max_iter + 1):
        rx = Aeq.T @ y + G.T @ z + c * tau
        ry = -Aeq @ x + beq * tau
        rz = s + G @ x - h * tau
        cx, by, hz = c @ x, beq @ y, h @ z
        rt = kappa + cx + by + hz
        gap = s @ z
        pres = max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0) / tau
        dres = np.linalg.norm(rx) / resx0 / tau
        pcost, dcost = cx / tau, -(by + hz) / tau
        relgap = max(abs(pcost - dcost), gap / tau**2) / (1.0 + abs(pcost) + abs(dcost))
        if pres <= tol and dres <= tol and relgap <= tol:
            status = ConicSolution.OPTIMAL
            break
        merit = max(pres, dres, relgap)
        if merit < best[0]:
            best = (merit, (x.copy(), y.copy(), z.copy(), s.copy(), tau))
        if hz + by < 0:
            pinf = np.linalg.norm(Aeq.T @ y + G.T @ z) / resx0 / (-(hz + by))
            if pinf < best_cert[0]:
                best_cert = (pinf, (y / -(hz + by), z / -(hz + by)))
            if pinf <= tol:
                status = ConicSolution.PRIMAL_INFEASIBLE
                break
        if cx < 0:
            dinf = max(np.linalg.norm(Aeq @ x) / resy0, np.linalg.norm(G @ x + s) / resz0) / (-cx)
            if dinf <= tol:
                status = ConicSolution.DUAL_INFEASIBLE
                break
        if it == max_iter:
            break

        try:
            W = _Scaling(space, s, z)
            K = kkt(W)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            break
        lam = W.lam
        slam = W.slam
        mu = (gap + tau * kappa) / (space.degree + 1)
        x1, y1, z1, _ = K.solve(-c, beq, h)
        denom_base = c @ x1 + beq @ y1 + h @ z1

        def direction(sigma, ds_target, dk_target):
            fac = 1.0 - sigma
            Rx, Ry, Rz, Rt = -fac * rx, -fac * ry, -fac * rz, -fac * rt
            us = _sinv(space, lam, slam, ds_target)
            x0, y0, z0, _ = K.solve(Rx, -Ry, Rz - W.apply(us, transpose=True))
            dtau = (Rt - dk_target / tau - c @ x0 - beq @ y0 - h @ z0) / (denom_base - kappa / tau)
            dx = x0 + dtau * x1
            dy = y0 + dtau * y1
            dz = z0 + dtau * z1
            wdz = W.apply(dz)
            dsh = us - wdz  # W^-T ds
            dkappa = (dk_target - kappa * dtau) / tau
            return dx, dy, dz, dsh, wdz, dtau, dkappa

        def steplen(dsh, wdz, dtau, dkappa):
            a = min(_max_step(space, lam, slam, dsh), _max_step(space, lam, slam, wdz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkappa < 0:
                a = min(a, -kappa / dkappa)
            return a

        lamsq = _sprod(space, lam, lam)
        # predictor
        dx, dy, dz, dsh, wdz, dtau, dkappa = direction(0.0, -lamsq, -tau * kappa)
        a_aff = min(1.0, steplen(dsh, wdz, dtau, dkappa))
        sigma = (1.0 - a_aff) ** 3
        # corrector
        corr = _sprod(space, dsh, wdz)
        ds_t = -lamsq - corr + sigma * mu * e
        dk_t = -tau * kappa - dtau * dkappa + sigma * mu
        dx, dy, dz, dsh, wdz, dtau, dkappa = direction(sigma, ds_t, dk_t)
        a = min(1.0, step * steplen(dsh, wdz, dtau, dkappa))

        x = x + a * dx
        y = y + a * dy
        z = z + a * dz
        s = s + a * W.apply(dsh, transpose=True)
        tau = tau + a * dtau
        kappa = kappa + a * dkappa
        # guard against drift out of the cone from round-off
        if space.min_eig(s) <= 0 or space.min_eig(z) <= 0 or tau <= 0 or kappa <= 0:
            break

    cert = None
    if status == ConicSolution.MAX_ITER:
        if best[0] <= reduced_tol:
            status = ConicSolution.OPTIMAL_INACCURATE
            x, y, z, s, tau = best[1]
        elif best_cert[0] <= reduced_tol:
            status = ConicSolution.PRIMAL_INFEASIBLE
            cert = best_cert[1]
    if status in (ConicSolution.OPTIMAL, ConicSolution.OPTIMAL_INACCURATE, ConicSolution.MAX_ITER):
        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
    elif status == ConicSolution.PRIMAL_INFEASIBLE:
        if cert is None:
            scale = -(hz + by)
            cert = (y / scale, z / scale)
        xs, ys, zs, ss = np.full(n, np.nan), cert[0], cert[1], np.zeros_like(s)
    else:
        scale = -cx
        xs, ys, zs, ss = x / scale, np.zeros_like(y), np.zeros_like(z), s / scale

    ylist, slist = _unsplit(order, eq_sizes, l_sizes, space, ys, zs, ss)
    if status in (ConicSolution.OPTIMAL, ConicSolution.OPTIMAL_INACCURATE, ConicSolution.MAX_ITER):
        pres, dres, relgap = residuals(program, xs, ylist, slist)
        obj = float(c @ xs)
    else:
        pres = dres = relgap = np.nan
        obj = np.inf if status == ConicSolution.PRIMAL_INFEASIBLE else -np.inf
    return ConicSolution(
        status=status,
        x=xs,
        objective=obj,
        primal_residual=float(pres),
        dual_residual=float(dres),
        gap=float(relgap),
        iterations=it,
        y=ylist,
        s=slist,
        method="ipm",
    )


def _unsplit(order, eq_sizes, l_sizes, space, y, z, s):
    """Map solver-ordered duals/slacks back to the program's block order."""
    eq_off = np.concatenate([[0], np.cumsum(eq_sizes)]).astype(int)
    l_off = np.concatenate([[0], np.cumsum(l_sizes)]).astype(int)
    ylist, slist = [], []
    for kind, idx in order:
        if kind == ZERO:
            sl = slice(eq_off[idx], eq_off[idx + 1])
            ylist.append(y[sl].copy())
            slist.append(np.zeros(sl.stop - sl.start))
        else:
            if kind == NONNEG:
                sl = slice(l_off[idx], l_off[idx + 1])
            elif kind == SOC:
                sl = space.qsl[idx]
            else:
                sl = space.ssl[idx]
            ylist.append(z[sl].copy())
            slist.append(s[sl].copy())
    return ylist, slist
