"""Numpy reference implementations of the numeric kernels.

Semantics match the compiled extension `_kernels`; this module is the
fallback selected by `backend` when the extension is missing or when
PLMIRELAX_BACKEND=pure is set.
"""

from __future__ import annotations

import numpy as np


def barrier_terms(S, dirs):
    """Log-det barrier pieces for one constraint block.

    S is the slack matrix and dirs the stacked derivative directions
    dS/dtheta, shape (p, m, m). Returns (ok, logdet, grad, hess) with
    grad[a] = tr(S^-1 dirs[a]) and hess[a, b] = tr(S^-1 dirs[a] S^-1
    dirs[b]). ok is False when S is not positive definite, in which case
    the other outputs are meaningless.
    """
    S = np.asarray(S, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return False, 0.0, np.zeros(dirs.shape[0]), np.zeros((dirs.shape[0],) * 2)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    sinv = np.linalg.inv(S)
    w = np.einsum("ij,ajk->aik", sinv, dirs)
    grad = np.einsum("aii->a", w)
    hess = np.einsum("aij,bji->ab", w, w)
    hess = 0.5 * (hess + hess.T)
    return True, logdet, grad, hess


def jacobi_eigh(M):
    """Eigendecomposition of a symmetric matrix: eigenvalues ascending and
    orthonormal eigenvectors as columns."""
    M = np.asarray(M, dtype=float)
    w, v = np.linalg.eigh(M)
    return w, v


def max_eigvals(stack):
    """Largest eigenvalue of each symmetric matrix in a (n, m, m) stack."""
    stack = np.asarray(stack, dtype=float)
    if stack.shape[0] == 0:
        return np.zeros(0)
    return np.linalg.eigvalsh(stack)[..., -1]


def group_logdet(S):
    """Sum of log-determinants over a (c, m, m) stack of slack matrices.

    Returns (ok, total); ok is False when any matrix in the stack is not
    positive definite."""
    S = np.asarray(S, dtype=float)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return False, 0.0
    diags = np.einsum("cii->ci", L)
    return True, float(2.0 * np.log(diags).sum())


def group_terms(S, A):
    """Barrier derivatives for a stack of constraints sharing one size.

    S has shape (c, m, m) holding slacks t*I - F_c(x); A has shape
    (c, n, m, m) holding the coefficient matrices of F_c in each of the n
    scalar variables. Returns (ok, logdet, gvar, gt, hvv, hvt, htt) fully
    reduced over the stack, with the sign convention of d(-logdet S):
    gvar[v] = sum_c tr(S_c^-1 A_cv), gt = -sum_c tr(S_c^-1), and the
    Hessian blocks hvv[v,w] = sum_c tr(P_cv P_cw), hvt[v] = -sum_c
    tr(P_cv S_c^-1), htt = sum_c tr(S_c^-2) where P_cv = S_c^-1 A_cv.
    """
    S = np.asarray(S, dtype=float)
    A = np.asarray(A, dtype=float)
    n = A.shape[1]
    ok, logdet = group_logdet(S)
    if not ok:
        return False, 0.0, np.zeros(n), 0.0, np.zeros((n, n)), np.zeros(n), 0.0
    sinv = np.linalg.inv(S)
    P = np.einsum("cij,cnjk->cnik", sinv, A)
    gvar = np.einsum("cnii->n", P)
    gt = -float(np.einsum("cii->", sinv))
    hvv = np.einsum("cnij,cmji->nm", P, P)
    hvv = 0.5 * (hvv + hvv.T)
    hvt = -np.einsum("cnij,cji->n", P, sinv)
    htt = float(np.einsum("cij,cji->", sinv, sinv))
    return True, logdet, gvar, gt, hvv, hvt, htt
