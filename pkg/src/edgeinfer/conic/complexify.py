"""Real embedding of conic programs with complex data and variables.

Layout of the real variable vector: variables are visited in order; a complex
variable ``z_i`` contributes the interleaved pair ``(Re z_i, Im z_i)`` and a
real variable contributes one entry.

Cones on complex affine expressions ``u = b - A x``:

* ``zero(m)``   ->  ``zero(2m)`` on interleaved ``(Re u_i, Im u_i)``, or
  ``zero(m)`` on ``Re u`` for blocks marked ``part="re"``;
* ``nonneg(m)`` ->  ``nonneg(m)`` on ``Re u`` (imaginary parts are ignored);
* ``soc(q)``    ->  ``soc(2q - 1)`` on ``(Re u_0, Re u_1, Im u_1, ...)``;
* ``psd(p)``    ->  ``psd(2p)`` on ``[[Re U, -Im U], [Im U, Re U]]`` where the
  Hermitian ``U`` is given by its lower triangle in the same column-major
  order as :func:`~edgeinfer.conic.program.svec` (unscaled; the embedding
  applies the sqrt(2) factors).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from ..errors import InvalidArgument
from .program import NONNEG, PSD, SOC, ZERO, Cone, ConicProgram, _svec_layout, smat


class ComplexConicProgram:
    """minimize ``Re(c^H x)`` s.t. ``b_i - A_i x`` in ``K_i`` with complex data.

    Parameters
    ----------
    c : array_like, complex, shape (d,)
    blocks : sequence of (A, b, cone) or (A, b, cone, part)
        Complex ``A`` (rows x d) and ``b``. Row counts: ``m`` for zero/nonneg,
        ``q`` for soc, ``p(p+1)/2`` for psd. ``part="re"`` on a zero block
        constrains only the real parts of its rows.
    real_vars : array_like of bool, optional
        Marks variables that are real (one real column instead of two).
    """

    def __init__(self, c, blocks, real_vars=None):
        self.c = np.asarray(c, dtype=complex).ravel()
        d = self.c.size
        self.real_vars = np.zeros(d, bool) if real_vars is None else np.asarray(real_vars, bool).ravel()
        if self.real_vars.size != d:
            raise InvalidArgument("real_vars length must match the number of variables")
        self.blocks = []
        for item in blocks:
            A, b, cone = item[:3]
            part = item[3] if len(item) > 3 else "both"
            if not isinstance(cone, Cone):
                cone = Cone(*cone)
            if part not in ("both", "re"):
                raise InvalidArgument("part must be 'both' or 're'")
            if part == "re" and cone.kind != ZERO:
                raise InvalidArgument("real-part-only blocks are supported for the zero cone")
            A = sp.csr_matrix(A, dtype=complex)
            b = np.asarray(b, dtype=complex).ravel()
            if A.shape != (cone.rows, d) or b.size != cone.rows:
                raise InvalidArgument(
                    f"{cone.kind}({cone.dim}) block expects A {(cone.rows, d)} and b ({cone.rows},)"
                )
            self.blocks.append((A, b, cone, part))

    @property
    def dimension(self):
        return self.c.size

    def column_map(self):
        """Real column index of (Re, Im) for each variable; Im is -1 for real ones."""
        re = np.empty(self.dimension, int)
        im = np.full(self.dimension, -1, int)
        col = 0
        for i, is_real in enumerate(self.real_vars):
            re[i] = col
            col += 1
            if not is_real:
                im[i] = col
                col += 1
        return re, im, col

    def recover(self, xr):
        """Complex variable vector from a solution of the embedded program."""
        re, im, _ = self.column_map()
        z = xr[re].astype(complex)
        cplx = im >= 0
        z[cplx] += 1j * xr[im[cplx]]
        return z


def _real_parts(A, re, im, ncols):
    """Real matrices mapping the real variable vector to Re(A x) and Im(A x)."""
    A = sp.coo_matrix(A)
    r, c, v = A.row, A.col, A.data
    mask = im[c] >= 0
    rows = np.concatenate([r, r[mask]])
    cols = np.concatenate([re[c], im[c[mask]]])
    Are = sp.csr_matrix((np.concatenate([v.real, -v.imag[mask]]), (rows, cols)), shape=(A.shape[0], ncols))
    Aim = sp.csr_matrix((np.concatenate([v.imag, v.real[mask]]), (rows, cols)), shape=(A.shape[0], ncols))
    return Are, Aim


@lru_cache(maxsize=32)
def _psd_embedding_map(p):
    """For each real svec entry of the order-2p embedding: (complex row, part, sign*scale)."""
    rows2, cols2, scale2 = _svec_layout(2 * p)
    crow_of = {}
    rows1, cols1, _ = _svec_layout(p)
    for k, (i, j) in enumerate(zip(rows1, cols1)):
        crow_of[(int(i), int(j))] = k
    src = np.empty(rows2.size, int)
    part = np.empty(rows2.size, int)
    coef = np.empty(rows2.size)
    for k, (i, j, sc) in enumerate(zip(rows2, cols2, scale2)):
        i, j = int(i), int(j)
        if i < p and j < p:
            src[k], part[k], coef[k] = crow_of[(i, j)], 0, sc
        elif i >= p and j >= p:
            src[k], part[k], coef[k] = crow_of[(i - p, j - p)], 0, sc
        else:
            a, bcol = i - p, j  # bottom-left block entry = Im(U[a, bcol])
            if a >= bcol:
                src[k], part[k], coef[k] = crow_of[(a, bcol)], 1, sc
            else:
                src[k], part[k], coef[k] = crow_of[(bcol, a)], 1, -sc
    return src, part, coef


def embed_complex(cprog):
    """Real :class:`ConicProgram` equivalent to a :class:`ComplexConicProgram`."""
    re, im, ncols = cprog.column_map()
    c = np.zeros(ncols)
    c[re] = cprog.c.real
    cplx = im >= 0
    c[im[cplx]] = cprog.c.imag[cplx]
    blocks = []
    if not cprog.blocks:
        return ConicProgram(c, blocks)
    # one pass over all rows, then per-block row slices
    Are_all, Aim_all = _real_parts(sp.vstack([blk[0] for blk in cprog.blocks], format="coo"), re, im, ncols)
    off = 0
    for A, b, cone, part in cprog.blocks:
        m = A.shape[0]
        Are, Aim = Are_all[off : off + m], Aim_all[off : off + m]
        bre, bim = b.real, b.imag
        off += m
        if cone.kind == ZERO and part == "re":
            blocks.append((Are, bre, Cone(ZERO, m)))
        elif cone.kind == ZERO:
            stackA = sp.vstack([Are, Aim], format="csr")
            stackb = np.concatenate([bre, bim])
            perm = np.empty(2 * m, int)
            perm[0::2] = np.arange(m)
            perm[1::2] = m + np.arange(m)
            blocks.append((stackA[perm], stackb[perm], Cone(ZERO, 2 * m)))
        elif cone.kind == NONNEG:
            blocks.append((Are, bre, Cone(NONNEG, m)))
        elif cone.kind == SOC:
            q = cone.dim
            perm = [0]
            for i in range(1, q):
                perm.extend([i, q + i])
            stackA = sp.vstack([Are, Aim], format="csr")[perm]
            stackb = np.concatenate([bre, bim])[perm]
            blocks.append((stackA, stackb, Cone(SOC, 2 * q - 1)))
        else:
            p = cone.dim
            src, which, coef = _psd_embedding_map(p)
            stackA = sp.vstack([Are, Aim], format="csr")
            stackb = np.concatenate([bre, bim])
            sel = src + which * m
            D = sp.diags(coef)
            blocks.append((D @ stackA[sel], coef * stackb[sel], Cone(PSD, 2 * p)))
    return ConicProgram(c, blocks)


def complex_psd_dual(y_block, p):
    """Hermitian p x p matrix represented by the dual of an embedded psd(2p) block.

    With ``Z`` the real dual matrix, ``V = (Z11 + Z22) + 1j (Z21 - Z12)``
    satisfies ``<E(U), Z> = Re tr(U^H V)`` for every embedded Hermitian ``U``.
    """
    Z = smat(np.asarray(y_block), 2 * p)
    V = (Z[:p, :p] + Z[p:, p:]) + 1j * (Z[p:, :p] - Z[:p, p:])
    return 0.5 * (V + V.conj().T)


def hermitian_tril(M):
    """Unscaled lower-triangle entries of a Hermitian matrix in embedding row order."""
    M = np.asarray(M)
    rows, cols, _ = _svec_layout(M.shape[-1])
    return M[..., rows, cols]
