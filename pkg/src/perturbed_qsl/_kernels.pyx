# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: fixed-step RK4 for decomposed generators and the QFI sum.

A time-dependent generator is represented as ``sum_k c_k(t) M_k`` with
constant superoperator matrices ``M_k`` (shape ``(K, D, D)``) and
coefficients pre-sampled at the three RK4 stage times of every step
(``coeffs[n, s, k]`` for stage times t, t+h/2, t+h).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zaxpy, zgemv

ctypedef double complex cplx

cnp.import_array()


cdef void _assemble(const cplx[:, :, ::1] ops, const double[::1] c, cplx[:, ::1] A) noexcept nogil:
    cdef int K = ops.shape[0], D = ops.shape[1]
    cdef int n = D * D, one = 1, k, i, j
    cdef cplx ck
    for i in range(D):
        for j in range(D):
            A[i, j] = 0
    for k in range(K):
        if c[k] == 0.0:
            continue
        ck = c[k]
        zaxpy(&n, &ck, <cplx*>&ops[k, 0, 0], &one, &A[0, 0], &one)


cdef void _matvec(const cplx[:, ::1] A, const cplx[::1] x, cplx[::1] y) noexcept nogil:
    # A is row-major, i.e. column-major A^T for BLAS.
    cdef int D = A.shape[0], one = 1
    cdef char trans = b'T'
    cdef cplx alpha = 1.0, beta = 0.0
    zgemv(&trans, &D, &D, &alpha, <cplx*>&A[0, 0], &D, <cplx*>&x[0], &one, &beta, &y[0], &one)


cdef void _copy(const double[::1] src, double[::1] dst) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(src.shape[0]):
        dst[k] = src[k]


cdef bint _same(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(a.shape[0]):
        if a[k] != b[k]:
            return False
    return True


def rk4_integrate(cplx[:, :, ::1] ops, double[:, :, ::1] coeffs, double[::1] hs,
                  cplx[::1] x0, int d, cnp.int8_t[::1] record, bint hermitize=True):
    """Integrate ``dx/dt = A(t) x`` over ``len(hs)`` steps.

    Returns ``(states, max_drift)`` where ``states`` holds the vector after
    every step flagged in ``record`` and ``max_drift`` is the largest
    ``|tr X - 1|`` seen before renormalisation.
    """
    cdef Py_ssize_t N = hs.shape[0], D = x0.shape[0], K = ops.shape[0]
    cdef Py_ssize_t n, i, j, s, a, b, n_out = 0, r = 0
    for n in range(N):
        n_out += record[n]
    out = np.empty((n_out, D), dtype=np.complex128)
    cdef cplx[:, ::1] outv = out
    cdef cplx[:, ::1] A0 = np.empty((D, D), dtype=np.complex128)
    cdef cplx[:, ::1] A1 = np.empty((D, D), dtype=np.complex128)
    cdef cplx[:, ::1] A2 = np.empty((D, D), dtype=np.complex128)
    cdef cplx[::1] x = np.array(x0, dtype=np.complex128)
    cdef cplx[::1] k1 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] k2 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] k3 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] k4 = np.empty(D, dtype=np.complex128)
    cdef cplx[::1] tmp = np.empty(D, dtype=np.complex128)
    cdef double[::1] last0 = np.full(K, np.nan)
    cdef double[::1] last1 = np.full(K, np.nan)
    cdef double[::1] last2 = np.full(K, np.nan)
    cdef double h, drift, max_drift = 0.0
    cdef cplx tr, u, w
    with nogil:
        for n in range(N):
            h = hs[n]
            if not _same(coeffs[n, 0], last0):
                if _same(coeffs[n, 0], last2):
                    # stage t of this step coincides with stage t+h of the last one
                    memcpy(&A0[0, 0], &A2[0, 0], D * D * sizeof(cplx))
                else:
                    _assemble(ops, coeffs[n, 0], A0)
                _copy(coeffs[n, 0], last0)
            if not _same(coeffs[n, 1], last1):
                _assemble(ops, coeffs[n, 1], A1)
                _copy(coeffs[n, 1], last1)
            if not _same(coeffs[n, 2], last2):
                _assemble(ops, coeffs[n, 2], A2)
                _copy(coeffs[n, 2], last2)
            _matvec(A0, x, k1)
            for i in range(D):
                tmp[i] = x[i] + 0.5 * h * k1[i]
            _matvec(A1, tmp, k2)
            for i in range(D):
                tmp[i] = x[i] + 0.5 * h * k2[i]
            _matvec(A1, tmp, k3)
            for i in range(D):
                tmp[i] = x[i] + h * k3[i]
            _matvec(A2, tmp, k4)
            for i in range(D):
                x[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            tr = 0
            for i in range(d):
                tr = tr + x[i * (d + 1)]
            drift = fabs(tr.real - 1.0) + fabs(tr.imag)
            if drift > max_drift:
                max_drift = drift
            if hermitize:
                for a in range(d):
                    for b in range(a, d):
                        i = a + d * b
                        j = b + d * a
                        u = x[i]
                        w = x[j]
                        x[i] = 0.5 * (u + w.conjugate())
                        x[j] = x[i].conjugate()
                tr = 0
                for i in range(d):
                    tr = tr + x[i * (d + 1)]
                for i in range(D):
                    x[i] = x[i] / tr.real
            if record[n]:
                for i in range(D):
                    outv[r, i] = x[i]
                r += 1
    return out, max_drift


def qfi_sum(double[::1] lam, cplx[:, ::1] G, double floor):
    """``2 sum_{ij} |G_ij|^2 / (l_i + l_j)`` over pairs with ``l_i + l_j > floor``."""
    cdef Py_ssize_t n = lam.shape[0], i, j
    cdef double s = 0.0, den
    cdef cplx g
    for i in range(n):
        for j in range(n):
            den = lam[i] + lam[j]
            if den > floor:
                g = G[i, j]
                s += (g.real * g.real + g.imag * g.imag) / den
    return 2.0 * s
