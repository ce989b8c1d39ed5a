"""Independent reference solvers used by the oracle and acceptance tests."""

import itertools

import numpy as np

from edgeinfer.gsbf import BeamformingProblem, solve_power_min


# ------------------------------------------------------------ rank oracle


def _constraint_arrays(prob):
    """Flat (group, row, col, coef) arrays of the affine constraints and their rhs."""
    ms = prob.ms
    grp, rows, cols, coef = [], [], [], []
    for g, c in enumerate(prob.constraints):
        for j, a in c.coeffs.items():
            grp.append(g)
            rows.append(c.row)
            cols.append(ms.col(j, c.message))
            coef.append(a)
    rhs = np.array([c.rhs for c in prob.constraints], complex)
    return np.array(grp), np.array(rows), np.array(cols), np.array(coef, complex), rhs


def altmin_feasible(prob, r, rng, restarts=100, iters=300, tol=1e-9, patience=20):
    """True when some restart of plain alternating least squares finds ``U^H V`` feasible at rank ``r``.

    A restart is abandoned once its residual has not halved for ``patience`` sweeps.
    """
    nrow, ncol = prob.shape
    grp, rows, cols, coef, rhs = _constraint_arrays(prob)
    G = rhs.size
    ir = np.arange(r)
    for _ in range(restarts):
        U = rng.standard_normal((r, nrow)) + 1j * rng.standard_normal((r, nrow))
        V = rng.standard_normal((r, ncol)) + 1j * rng.standard_normal((r, ncol))
        best, stall = np.inf, 0
        for _ in range(iters):
            # V step: sum coef conj(U[i,row]) V[i,col] = rhs
            A = np.zeros((G, r * ncol), complex)
            np.add.at(A, (grp[:, None], ir[None] * ncol + cols[:, None]), coef[:, None] * U[:, rows].T.conj())
            V = V + np.linalg.lstsq(A, rhs - A @ V.ravel(), rcond=None)[0].reshape(r, ncol)
            # U step on conj(U): sum coef V[i,col] conj(U[i,row]) = rhs
            B = np.zeros((G, r * nrow), complex)
            np.add.at(B, (grp[:, None], ir[None] * nrow + rows[:, None]), coef[:, None] * V[:, cols].T)
            Uc = U.conj().ravel()
            Uc = Uc + np.linalg.lstsq(B, rhs - B @ Uc, rcond=None)[0]
            U = Uc.reshape(r, nrow).conj()
            res = np.max(np.abs(B @ Uc - rhs))
            if res <= tol:
                return True
            if res > 0.5 * best:
                stall += 1
                if stall >= patience:
                    break
            else:
                best, stall = res, 0
    return False


def altmin_rank(prob, rng, restarts=100, r_max=None):
    """Smallest rank certified feasible by the alternating-minimization oracle."""
    r_max = min(prob.shape) if r_max is None else r_max
    for r in range(1, r_max + 1):
        if altmin_feasible(prob, r, rng, restarts=restarts):
            return r
    return None


# ------------------------------------------------------------ support oracle


def exhaustive_support(prob: BeamformingProblem):
    """Least total power over all 2^(N K) supports (each user served by someone).

    Returns ``(total_power, active)``, or ``(inf, None)`` when no support is feasible.
    """
    N, K, _ = prob.shape
    sc = prob.scenario
    best, best_act = np.inf, None
    for bits in itertools.product([False, True], repeat=N * K):
        act = np.array(bits).reshape(N, K)
        if not act.any(axis=0).all():
            continue
        sol = solve_power_min(prob, act, method="conic")
        if sol.feasible:
            t = sol.transmit_power / sc.eta + sc.p_c * act.sum()
            if t < best:
                best, best_act = t, act
    return best, best_act


# ------------------------------------------------------------ phase grid oracle


def grid_slack(lp, step_deg=1.0):
    """Maximum direct slack of a lifted phase problem over a uniform phase grid (M = 2)."""
    assert lp.num_elements == 2
    ang = np.deg2rad(np.arange(0.0, 360.0, step_deg))
    t1, t2 = np.meshgrid(ang, ang, indexing="ij")
    V = np.stack([np.exp(1j * t1.ravel()), np.exp(1j * t2.ravel())], axis=1)
    best = -np.inf
    for chunk in np.array_split(V, 36):
        H = lp.direct[None] + np.einsum("nklm,rm->rnkl", lp.cascade, chunk.conj())
        g = np.abs(np.einsum("rnkl,njl->rkj", H.conj(), lp.w)) ** 2
        sig = np.einsum("rkk->rk", g)
        interf = g.sum(axis=2) - sig
        s = np.min(sig - lp.gamma * interf - lp.gamma * lp.noise_power, axis=1)
        best = max(best, float(s.max()))
    return best


def rayleigh_scenario(rng, N=2, K=2, L=2, M=2, gamma=1.0, noise=0.1, cascade_gain=1.0, p_max=1e3, p_c=0.1):
    """Unit-variance Rayleigh direct and cascade links (phases matter as much as the direct path)."""
    from edgeinfer.scenario import EdgeScenario, IrsLinkSet, crandn

    return EdgeScenario(
        ap_pos=np.zeros((N, 2)),
        user_pos=np.zeros((K, 2)),
        irs_pos=np.zeros(2),
        direct=crandn(rng, (N, K, L)),
        irs=IrsLinkSet(np.sqrt(cascade_gain) * crandn(rng, (N, M, L)), crandn(rng, (K, M))),
        noise_power=noise,
        p_max=p_max,
        p_c=p_c,
        gamma=np.full(K, gamma),
    )
