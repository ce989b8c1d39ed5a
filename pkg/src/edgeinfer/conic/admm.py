"""Operator-splitting conic solver on the homogeneous self-dual embedding.

Iterates the splitting of O'Donoghue, Chu, Parikh and Boyd: each step solves a
linear system with the fixed matrix ``[[I, A'], [-A, I]]`` (one dense Cholesky
of ``I + A'A`` at setup) and projects onto ``R^d x K* x R_+``. Data are
equilibrated with Ruiz scaling, constant across rows of each SOC/PSD block so
the cones are preserved.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .program import NONNEG, PSD, SOC, ZERO, ConicSolution, project_cone, residuals


def _block_slices(program):
    out, start = [], 0
    for blk in program.blocks:
        out.append((slice(start, start + blk.cone.rows), blk.cone))
        start += blk.cone.rows
    return out


def _project_dual(y, slices):
    out = np.empty_like(y)
    for sl, cone in slices:
        if cone.kind == ZERO:
            out[sl] = y[sl]
        elif cone.kind == NONNEG:
            out[sl] = np.maximum(y[sl], 0.0)
        else:
            out[sl] = project_cone(y[sl], cone)
    return out


def _equilibrate(A, slices, passes=15):
    m, n = A.shape
    D = np.ones(m)
    E = np.ones(n)
    As = A.copy()
    for _ in range(passes):
        rn = np.sqrt(np.max(np.abs(As), axis=1)) if n else np.ones(m)
        cn = np.sqrt(np.max(np.abs(As), axis=0)) if m else np.ones(n)
        for sl, cone in slices:
            if cone.kind in (SOC, PSD) and sl.stop > sl.start:
                rn[sl] = np.mean(rn[sl])
        rn = np.where(rn < 1e-4, 1.0, rn)
        cn = np.where(cn < 1e-4, 1.0, cn)
        D /= rn
        E /= cn
        As = (As / rn[:, None]) / cn[None, :]
    return As, D, E


def solve_admm(program, tol=1e-6, max_iter=50000, alpha=1.5, check_every=10):
    """Solve ``program`` with the relaxed splitting method.

    Returns a :class:`ConicSolution` whose residuals are evaluated on the
    original (unscaled) data.
    """
    A_sp, b = program.stacked()
    c = program.c
    m, n = A_sp.shape
    slices = _block_slices(program)
    A0 = A_sp.toarray()
    A, D, E = _equilibrate(A0, slices)
    nb = np.linalg.norm(D * b)
    nc = np.linalg.norm(E * c)
    sb = 1.0 / max(nb, 1e-8) if nb > 0 else 1.0
    sc = 1.0 / max(nc, 1e-8) if nc > 0 else 1.0
    bs = D * b * sb
    cs = E * c * sc

    chol = sla.cho_factor(np.eye(n) + A.T @ A, lower=True)

    def solve_M(a1, a2):
        x = sla.cho_solve(chol, a1 - A.T @ a2)
        return x, a2 + A @ x

    gx, gy = solve_M(cs, bs)
    hg = cs @ gx + bs @ gy
    denom = 1.0 + hg

    # u = (x, y, tau), v = (r, s, kappa)
    ux, uy, ut = np.zeros(n), np.zeros(m), 1.0
    vx, vy, vt = np.zeros(n), np.zeros(m), 1.0

    def unscale(ux, uy, vy, ut):
        x = E * ux / (ut * sb)
        y = D * uy / (ut * sc)
        s = vy / (D * ut * sb)
        return x, y, s

    def split(vec):
        return [vec[sl] for sl, _ in slices]

    status = ConicSolution.MAX_ITER
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        wx, wy, wt = ux + vx, uy + vy, ut + vt
        zx, zy = solve_M(wx, wy)
        tt = (wt + cs @ zx + bs @ zy) / denom
        tx = zx - tt * gx
        ty = zy - tt * gy
        # over-relaxation
        rx = alpha * tx + (1 - alpha) * ux
        ry = alpha * ty + (1 - alpha) * uy
        rt = alpha * tt + (1 - alpha) * ut
        ux_new = rx - vx
        uy_new = _project_dual(ry - vy, slices)
        ut_new = max(rt - vt, 0.0)
        vx = vx - rx + ux_new
        vy = vy - ry + uy_new
        vt = vt - rt + ut_new
        ux, uy, ut = ux_new, uy_new, ut_new

        if it % check_every and it != max_iter:
            continue
        kap = vt
        if ut > 1e-12 * max(1.0, kap):
            x, y, s = unscale(ux, uy, vy, ut)
            ys, ss = split(y), split(s)
            pres, dres, gap = residuals(program, x, ys, ss)
            best = (x, ys, ss, pres, dres, gap)
            if max(pres, dres, gap) <= tol:
                status = ConicSolution.OPTIMAL
                break
        else:
            # certificates from the unscaled direction
            yd = D * uy
            xd = E * ux
            sd = vy / D
            by = b @ yd
            cx = c @ xd
            if by < 0 and np.linalg.norm(A0.T @ yd) <= tol * -by:
                status = ConicSolution.PRIMAL_INFEASIBLE
                best = (np.full(n, np.nan), split(yd / -by), split(np.zeros(m)), np.nan, np.nan, np.nan)
                break
            if cx < 0 and np.linalg.norm(A0 @ xd + sd) <= tol * -cx:
                status = ConicSolution.DUAL_INFEASIBLE
                best = (xd / -cx, split(np.zeros(m)), split(sd / -cx), np.nan, np.nan, np.nan)
                break

    if best is None:
        x, y, s = unscale(ux, uy, vy, max(ut, 1e-300))
        pres, dres, gap = residuals(program, x, split(y), split(s))
        best = (x, split(y), split(s), pres, dres, gap)
    x, ys, ss, pres, dres, gap = best
    obj = float(c @ x) if status != ConicSolution.PRIMAL_INFEASIBLE else np.inf
    if status == ConicSolution.DUAL_INFEASIBLE:
        obj = -np.inf
    return ConicSolution(status, x, obj, pres, dres, gap, it, ys, ss, method="admm")
