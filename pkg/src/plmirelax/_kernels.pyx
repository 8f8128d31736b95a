# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled numeric kernels: Cholesky-based barrier pieces and a cyclic
Jacobi eigensolver. Interface and semantics match `_purekernels`."""

from libc.math cimport fabs, log, sqrt, hypot

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef int _cholesky(double[:, ::1] a, Py_ssize_t n) noexcept nogil:
    # In-place lower Cholesky; returns 0 on success, 1 if not PD.
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if s <= 0.0:
            return 1
        a[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= a[i, k] * a[j, k]
            a[i, j] = s / a[j, j]
    return 0


cdef void _chol_inverse(double[:, ::1] l, double[:, ::1] out, Py_ssize_t n) noexcept nogil:
    # out = (L L^T)^-1 given the lower factor L.
    cdef Py_ssize_t i, j, k, col
    cdef double s
    # Invert L in place into out (lower triangular inverse).
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for col in range(n):
        out[col, col] = 1.0 / l[col, col]
        for i in range(col + 1, n):
            s = 0.0
            for k in range(col, i):
                s -= l[i, k] * out[k, col]
            out[i, col] = s / l[i, i]
    # out := out^T @ out, overwriting from the bottom up so reads stay valid.
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(j, n):
                s += out[k, i] * out[k, j]
            l[i, j] = s
            l[j, i] = s
    for i in range(n):
        for j in range(n):
            out[i, j] = l[i, j]


def barrier_terms(S, dirs):
    """See `_purekernels.barrier_terms`."""
    cdef cnp.ndarray[double, ndim=2] s_arr = np.array(S, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=3] d_arr = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef Py_ssize_t n = s_arr.shape[0]
    cdef Py_ssize_t p = d_arr.shape[0]
    cdef cnp.ndarray[double, ndim=2] sinv = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] w = np.empty((p, n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] grad = np.zeros(p, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] hess = np.zeros((p, p), dtype=np.float64)
    cdef double[:, ::1] sv = s_arr
    cdef double[:, ::1] iv = sinv
    cdef double[:, :, ::1] dv = d_arr
    cdef double[:, :, ::1] wv = w
    cdef double[:] gv = grad
    cdef double[:, ::1] hv = hess
    cdef Py_ssize_t a, b, i, j, k
    cdef double logdet = 0.0, acc

    if _cholesky(sv, n):
        return False, 0.0, grad, hess
    for i in range(n):
        logdet += 2.0 * log(sv[i, i])
    _chol_inverse(sv, iv, n)

    with nogil:
        for a in range(p):
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += iv[i, k] * dv[a, k, j]
                    wv[a, i, j] = acc
            acc = 0.0
            for i in range(n):
                acc += wv[a, i, i]
            gv[a] = acc
        for a in range(p):
            for b in range(a, p):
                acc = 0.0
                for i in range(n):
                    for j in range(n):
                        acc += wv[a, i, j] * wv[b, j, i]
                hv[a, b] = acc
                hv[b, a] = acc
    return True, logdet, grad, hess


cdef int _jacobi(double[:, ::1] a, double[:, ::1] v, double[:] w, Py_ssize_t n,
                 int max_sweeps) noexcept nogil:
    # Cyclic Jacobi on a symmetric matrix; eigenvectors accumulated in v.
    # Returns 0 on convergence, 1 if the sweep cap was hit.
    cdef Py_ssize_t p, q, i, sweep
    cdef double off, scale, theta, t, c, s, tau, apq, app, aqq, g, h
    for i in range(n):
        for p in range(n):
            v[i, p] = 1.0 if i == p else 0.0
    scale = 0.0
    for p in range(n):
        for q in range(n):
            if fabs(a[p, q]) > scale:
                scale = fabs(a[p, q])
    if scale == 0.0:
        for i in range(n):
            w[i] = 0.0
        return 0
    for sweep in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= 1.0e-28 * scale * scale * n * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) < 1.0e-300:
                    continue
                app = a[p, p]
                aqq = a[q, q]
                theta = 0.5 * (aqq - app) / apq
                t = 1.0 / (fabs(theta) + sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for i in range(n):
                    if i != p and i != q:
                        g = a[i, p]
                        h = a[i, q]
                        a[i, p] = g - s * (h + tau * g)
                        a[p, i] = a[i, p]
                        a[i, q] = h + s * (g - tau * h)
                        a[q, i] = a[i, q]
                for i in range(n):
                    g = v[i, p]
                    h = v[i, q]
                    v[i, p] = g - s * (h + tau * g)
                    v[i, q] = h + s * (g - tau * h)
    else:
        return 1
    for i in range(n):
        w[i] = a[i, i]
    return 0


def jacobi_eigh(M, int max_sweeps=50):
    """Cyclic Jacobi eigendecomposition; eigenvalues ascending, orthonormal
    eigenvectors as columns. Raises RuntimeError at the sweep cap."""
    cdef cnp.ndarray[double, ndim=2] a = np.array(M, dtype=np.float64, order="C")
    cdef Py_ssize_t n = a.shape[0]
    cdef cnp.ndarray[double, ndim=2] v = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.empty(n, dtype=np.float64)
    if _jacobi(a, v, w, n, max_sweeps):
        raise RuntimeError(f"jacobi sweep cap {max_sweeps} reached")
    order = np.argsort(w, kind="stable")
    return w[order], np.ascontiguousarray(v[:, order])


def max_eigvals(stack):
    """Largest eigenvalue per symmetric matrix in a (n, m, m) stack."""
    cdef cnp.ndarray[double, ndim=3] arr = np.ascontiguousarray(stack, dtype=np.float64)
    cdef Py_ssize_t count = arr.shape[0]
    cdef Py_ssize_t n = arr.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] v = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] a = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef double[:, :, ::1] sv = arr
    cdef Py_ssize_t idx, i, j
    cdef double best
    for idx in range(count):
        for i in range(n):
            for j in range(n):
                av[i, j] = sv[idx, i, j]
        if _jacobi(av, v, w, n, 60):
            raise RuntimeError("jacobi sweep cap reached")
        best = w[0]
        for i in range(1, n):
            if w[i] > best:
                best = w[i]
        out[idx] = best
    return out


def group_logdet(S):
    """See `_purekernels.group_logdet`."""
    cdef cnp.ndarray[double, ndim=3] arr = np.array(S, dtype=np.float64, order="C")
    cdef Py_ssize_t count = arr.shape[0]
    cdef Py_ssize_t n = arr.shape[1]
    cdef cnp.ndarray[double, ndim=2] a = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] av = a
    cdef double[:, :, ::1] sv = arr
    cdef Py_ssize_t c, i, j
    cdef double total = 0.0
    cdef int bad = 0
    with nogil:
        for c in range(count):
            for i in range(n):
                for j in range(n):
                    av[i, j] = sv[c, i, j]
            if _cholesky(av, n):
                bad = 1
                break
            for i in range(n):
                total += 2.0 * log(av[i, i])
    if bad:
        return False, 0.0
    return True, total


def group_terms(S, A):
    """See `_purekernels.group_terms`."""
    cdef cnp.ndarray[double, ndim=3] s_arr = np.array(S, dtype=np.float64, order="C")
    cdef cnp.ndarray[double, ndim=4] a_arr = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t count = s_arr.shape[0]
    cdef Py_ssize_t n = s_arr.shape[1]
    cdef Py_ssize_t nv = a_arr.shape[1]
    cdef cnp.ndarray[double, ndim=1] gvar = np.zeros(nv, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] hvv = np.zeros((nv, nv), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] hvt = np.zeros(nv, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] chol = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] sinv = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=3] p_buf = np.empty((nv, n, n), dtype=np.float64)
    cdef double[:, :, ::1] sv = s_arr
    cdef double[:, :, :, ::1] avv = a_arr
    cdef double[:, ::1] cv = chol
    cdef double[:, ::1] iv = sinv
    cdef double[:, :, ::1] pv = p_buf
    cdef double[:] gvarv = gvar
    cdef double[:, ::1] hvvv = hvv
    cdef double[:] hvtv = hvt
    cdef Py_ssize_t c, v, u, i, j, k
    cdef double logdet = 0.0, gt = 0.0, htt = 0.0, acc
    cdef int bad = 0
    with nogil:
        for c in range(count):
            for i in range(n):
                for j in range(n):
                    cv[i, j] = sv[c, i, j]
            if _cholesky(cv, n):
                bad = 1
                break
            for i in range(n):
                logdet += 2.0 * log(cv[i, i])
            _chol_inverse(cv, iv, n)
            # P_v = Sinv @ A_cv, traces feed gradient and Hessian blocks
            for v in range(nv):
                for i in range(n):
                    for j in range(n):
                        acc = 0.0
                        for k in range(n):
                            acc += iv[i, k] * avv[c, v, k, j]
                        pv[v, i, j] = acc
                acc = 0.0
                for i in range(n):
                    acc += pv[v, i, i]
                gvarv[v] += acc
                acc = 0.0
                for i in range(n):
                    for j in range(n):
                        acc += pv[v, i, j] * iv[j, i]
                hvtv[v] -= acc
            acc = 0.0
            for i in range(n):
                acc += iv[i, i]
            gt -= acc
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    acc += iv[i, j] * iv[j, i]
            htt += acc
            for v in range(nv):
                for u in range(v, nv):
                    acc = 0.0
                    for i in range(n):
                        for j in range(n):
                            acc += pv[v, i, j] * pv[u, j, i]
                    hvvv[v, u] += acc
    if bad:
        return False, 0.0, np.zeros(nv), 0.0, np.zeros((nv, nv)), np.zeros(nv), 0.0
    for v in range(nv):
        for u in range(v + 1, nv):
            hvv[u, v] = hvv[v, u]
    return True, logdet, gvar, gt, hvv, hvt, htt
