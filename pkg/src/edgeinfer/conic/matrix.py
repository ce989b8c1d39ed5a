"""Matrix primitives: singular-value thresholding, Ky Fan subgradients, PSD projection.

Decompositions use LAPACK through ``numpy.linalg`` (``gesdd`` for SVD, ``heevd``
for Hermitian eigenproblems). Singular values come back in nonincreasing order
and ties are resolved by that routine's fixed ordering.
"""

from __future__ import annotations

import numpy as np

from ..errors import InvalidArgument


def _gram_svd(X):
    """Thin SVD of a strongly rectangular matrix through its small Gram matrix.

    Returns (U, s, Vh) like ``np.linalg.svd(X, full_matrices=False)`` but only
    for the nonzero part of the spectrum; singular vectors for singular values
    below ~1e-8 * s_max are not reliable and are dropped.
    """
    m, n = X.shape
    if m <= n:
        lam, U = np.linalg.eigh(X @ X.conj().T)
        lam, U = lam[::-1], U[:, ::-1]
        s = np.sqrt(np.maximum(lam, 0.0))
        keep = s > 1e-8 * max(s[0] if s.size else 0.0, 1e-300)
        U, s = U[:, keep], s[keep]
        Vh = (U.conj().T @ X) / s[:, None]
        return U, s, Vh
    V, s, Uh = _gram_svd(X.conj().T)
    return Uh.conj().T, s, V.conj().T


def singular_values(X):
    return np.linalg.svd(np.asarray(X), compute_uv=False)


def nuclear_norm(X):
    return float(np.sum(singular_values(X)))


def kyfan_norm(X, r):
    """Sum of the r largest singular values."""
    return float(np.sum(singular_values(X)[:r]))


def svt(X, tau, fast=False):
    """Singular-value thresholding: the prox of ``tau * ||.||_*`` at ``X``.

    Parameters
    ----------
    X : array_like
        Real or complex matrix.
    tau : float
        Threshold, ``tau >= 0``.
    fast : bool
        Use the Gram-matrix route (exact in exact arithmetic, cheaper for very
        wide or tall matrices, loses accuracy below ~1e-8 of the top singular
        value). Only the thresholded part matters, so this is safe whenever
        ``tau`` is not itself tiny relative to ``||X||_2``.
    """
    if tau < 0:
        raise InvalidArgument("threshold must be nonnegative")
    X = np.asarray(X)
    if tau == 0:
        return X.copy()
    m, n = X.shape
    if fast and min(m, n) > 0:
        if m <= n:
            lam, U = np.linalg.eigh(X @ X.conj().T)
            s = np.sqrt(np.maximum(lam, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                f = np.where(s > tau, 1.0 - tau / s, 0.0)
            return ((U * f) @ U.conj().T) @ X
        return svt(X.conj().T, tau, fast=True).conj().T
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    k = int(np.count_nonzero(s))
    return (U[:, :k] * s[:k]) @ Vh[:k]


def kyfan_subgradient(X, r):
    """Subgradient ``U_r V_r^H`` of the Ky Fan r-norm at ``X``."""
    X = np.asarray(X)
    if not 1 <= r <= min(X.shape):
        raise InvalidArgument(f"rank {r} outside [1, {min(X.shape)}]")
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    return U[:, :r] @ Vh[:r]


def psd_project(S, herm_tol=1e-10):
    """Nearest (Frobenius) positive semidefinite matrix to a Hermitian ``S``."""
    S = np.asarray(S)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidArgument("expected a square matrix")
    asym = np.max(np.abs(S - S.conj().T)) if S.size else 0.0
    if asym > herm_tol * max(1.0, np.max(np.abs(S))):
        raise InvalidArgument(f"matrix is not Hermitian (asymmetry {asym:.3g})")
    S = 0.5 * (S + S.conj().T)
    lam, U = np.linalg.eigh(S)
    lam = np.maximum(lam, 0.0)
    out = (U * lam) @ U.conj().T
    return 0.5 * (out + out.conj().T)
