"""Containers for real conic programs and their solutions.

A program is

    minimize    c' x
    subject to  b_i - A_i x  in  K_i      for every block i

where each ``K_i`` is one of

* ``zero(m)``    the origin of R^m (equality constraints),
* ``nonneg(m)``  the nonnegative orthant,
* ``soc(q)``     the second-order cone {(t, u) : ||u||_2 <= t} of dimension q,
* ``psd(p)``     symmetric p x p positive semidefinite matrices, stored as the
  scaled lower triangle (see :func:`svec`).

The PSD vectorization walks the lower triangle column by column and multiplies
off-diagonal entries by sqrt(2), so that ``svec(X) @ svec(Y) == trace(X @ Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ..errors import InvalidArgument

ZERO = "zero"
NONNEG = "nonneg"
SOC = "soc"
PSD = "psd"
CONE_KINDS = (ZERO, NONNEG, SOC, PSD)

SQRT2 = np.sqrt(2.0)


@lru_cache(maxsize=64)
def _svec_layout(p):
    # column-major lower triangle == row-major upper triangle transposed
    cols, rows = np.triu_indices(p)
    scale = np.where(rows == cols, 1.0, SQRT2)
    rows.setflags(write=False)
    cols.setflags(write=False)
    scale.setflags(write=False)
    return rows, cols, scale


def svec(X):
    """Scaled lower-triangle vectorization of a symmetric matrix (or a stack)."""
    X = np.asarray(X)
    p = X.shape[-1]
    rows, cols, scale = _svec_layout(p)
    return X[..., rows, cols] * scale


@lru_cache(maxsize=64)
def _smat_layout(p):
    # svec index and inverse scale of every matrix entry
    rows, cols, scale = _svec_layout(p)
    idx = np.empty((p, p), dtype=np.intp)
    idx[rows, cols] = np.arange(rows.size)
    idx[cols, rows] = np.arange(rows.size)
    inv = 1.0 / scale[idx]
    idx.setflags(write=False)
    inv.setflags(write=False)
    return idx, inv


def smat(v, p=None):
    """Inverse of :func:`svec`. Accepts a single vector or a stack of them."""
    v = np.asarray(v)
    n = v.shape[-1]
    if p is None:
        p = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    if p * (p + 1) // 2 != n:
        raise InvalidArgument(f"length {n} is not a triangular number")
    if v.ndim == 1:
        idx, inv = _smat_layout(p)
        return v[idx] * inv
    rows, cols, scale = _svec_layout(p)
    out = np.zeros(v.shape[:-1] + (p, p), dtype=v.dtype)
    vals = v / scale
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


@dataclass(frozen=True)
class Cone:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise InvalidArgument(f"unknown cone kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 0:
            raise InvalidArgument(f"cone dimension must be a nonnegative integer, got {self.dim}")
        if self.kind == SOC and self.dim < 1:
            raise InvalidArgument("second-order cone needs dimension >= 1")
        if self.kind == PSD and self.dim < 1:
            raise InvalidArgument("PSD cone needs order >= 1")

    @property
    def rows(self):
        if self.kind == PSD:
            return self.dim * (self.dim + 1) // 2
        return self.dim


@dataclass(frozen=True)
class ConeBlock:
    """One constraint block ``b - A x in cone``."""

    A: sp.csr_matrix
    b: np.ndarray
    cone: Cone


class ConicProgram:
    """Linear objective over an intersection of affine slices of cones.

    Parameters
    ----------
    c : array_like, shape (d,)
        Objective vector.
    blocks : sequence of (A, b, cone)
        ``A`` may be dense or any scipy sparse matrix; it is stored as CSR.
        ``cone`` is a :class:`Cone` or a ``(kind, dim)`` pair.
    """

    def __init__(self, c, blocks):
        self.c = np.asarray(c, dtype=float).ravel()
        if not np.all(np.isfinite(self.c)):
            raise InvalidArgument("objective contains non-finite entries")
        d = self.c.size
        stored = []
        for item in blocks:
            if isinstance(item, ConeBlock):
                A, b, cone = item.A, item.b, item.cone
            else:
                A, b, cone = item
            if not isinstance(cone, Cone):
                cone = Cone(*cone)
            A = sp.csr_matrix(A, dtype=float)
            b = np.asarray(b, dtype=float).ravel()
            if A.shape != (cone.rows, d):
                raise InvalidArgument(
                    f"{cone.kind}({cone.dim}) block expects A of shape {(cone.rows, d)}, got {A.shape}"
                )
            if b.size != cone.rows:
                raise InvalidArgument(
                    f"{cone.kind}({cone.dim}) block expects b of length {cone.rows}, got {b.size}"
                )
            if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
                raise InvalidArgument("constraint data contains non-finite entries")
            stored.append(ConeBlock(A, b, cone))
        self.blocks = tuple(stored)

    @property
    def dimension(self):
        return self.c.size

    @property
    def cones(self):
        return [blk.cone for blk in self.blocks]

    def stacked(self):
        """Return (A, b) with all blocks stacked in declaration order."""
        if not self.blocks:
            return sp.csr_matrix((0, self.dimension)), np.zeros(0)
        A = sp.vstack([blk.A for blk in self.blocks], format="csr")
        b = np.concatenate([blk.b for blk in self.blocks])
        return A, b

    def slack(self, x):
        """Per-block slacks ``b_i - A_i x``."""
        return [blk.b - blk.A @ x for blk in self.blocks]

    def violation(self, x):
        """Largest cone violation of ``x`` (0 when feasible)."""
        worst = 0.0
        for blk, s in zip(self.blocks, self.slack(x)):
            worst = max(worst, cone_violation(s, blk.cone))
        return worst


def cone_violation(s, cone):
    """Distance-like violation of membership ``s in cone`` (0 if inside)."""
    if s.size == 0:
        return 0.0
    if cone.kind == ZERO:
        return float(np.max(np.abs(s)))
    if cone.kind == NONNEG:
        return float(max(0.0, -np.min(s)))
    if cone.kind == SOC:
        return float(max(0.0, np.linalg.norm(s[1:]) - s[0]))
    lam = np.linalg.eigvalsh(smat(s, cone.dim))
    return float(max(0.0, -lam[0]))


def project_cone(s, cone):
    """Euclidean projection onto ``cone`` (``zero`` projects to the origin)."""
    if cone.kind == ZERO:
        return np.zeros_like(s)
    if cone.kind == NONNEG:
        return np.maximum(s, 0.0)
    if cone.kind == SOC:
        t, u = s[0], s[1:]
        nu = np.linalg.norm(u)
        if nu <= t:
            return s.copy()
        if nu <= -t:
            return np.zeros_like(s)
        a = 0.5 * (t + nu)
        out = np.empty_like(s)
        out[0] = a
        out[1:] = (a / nu) * u
        return out
    S = smat(s, cone.dim)
    lam, U = np.linalg.eigh(S)
    lam = np.maximum(lam, 0.0)
    return svec((U * lam) @ U.T)


def project_dual_cone(s, cone):
    """Projection onto the dual cone (zero <-> free; the others are self-dual)."""
    if cone.kind == ZERO:
        return s.copy()
    return project_cone(s, cone)


@dataclass
class ConicSolution:
    """Solver output.

    ``y`` holds one dual vector per constraint block (same order as the
    program); at optimality ``c + sum_i A_i' y_i = 0`` and each ``y_i`` lies in
    the dual of its cone.  ``s`` holds the matching slacks ``b_i - A_i x``.
    """

    status: str
    x: np.ndarray
    objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    y: list = field(default_factory=list)
    s: list = field(default_factory=list)
    method: str = ""

    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    MAX_ITER = "max_iter"
    # stalled before ``tol`` but within the reduced-accuracy tolerance
    OPTIMAL_INACCURATE = "optimal_inaccurate"

    @property
    def optimal(self):
        return self.status in (self.OPTIMAL, self.OPTIMAL_INACCURATE)


def residuals(p, x, y, s):
    """Relative primal, dual and gap residuals of a candidate primal-dual triple.

    Used by both solvers so that "optimal" means the same thing everywhere.
    """
    A, b = p.stacked()
    s_all = np.concatenate(s) if s else np.zeros(0)
    y_all = np.concatenate(y) if y else np.zeros(0)
    pr = A @ x + s_all - b
    dr = A.T @ y_all + p.c
    pcost = float(p.c @ x)
    dcost = float(-b @ y_all)
    nb = np.linalg.norm(b)
    nc = np.linalg.norm(p.c)
    pres = np.linalg.norm(pr) / (1.0 + nb)
    dres = np.linalg.norm(dr) / (1.0 + nc)
    comp = abs(float(s_all @ y_all))
    gap = max(abs(pcost - dcost), comp) / (1.0 + abs(pcost) + abs(dcost))
    return pres, dres, gap
