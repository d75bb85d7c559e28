# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: the 0F1 series and batched Hermitian solves.

Semantics match ``_pykernels`` exactly; see that module for the contracts.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, NAN

cnp.import_array()

cdef double RESCALE = 1e100


def log_hyp0f1(double b, x, double rtol=1e-14, long max_terms=10000):
    cdef cnp.ndarray[double, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t n = flat.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] nterms = np.empty(n, dtype=np.int64)
    cdef double[::1] xv = flat
    cdef double[::1] ov = out
    cdef cnp.int64_t[::1] nv = nterms
    cdef Py_ssize_t i
    cdef long k
    cdef double xi, t, s, offset, ratio
    with nogil:
        for i in range(n):
            xi = xv[i]
            s = 1.0
            t = 1.0
            offset = 0.0
            k = 1
            if xi > 0.0:
                while k <= max_terms:
                    t = t * xi / ((b + k - 1.0) * k)
                    s = s + t
                    if s > RESCALE:
                        t = t / s
                        offset = offset + log(s)
                        s = 1.0
                    ratio = xi / ((b + k) * (k + 1.0))
                    if ratio < 1.0 and t < rtol * s * (1.0 - ratio):
                        break
                    k += 1
            nv[i] = k + 1 if xi > 0.0 else 1
            ov[i] = log(s) + offset
    return out.reshape(np.shape(x)), nterms.reshape(np.shape(x))


def hpd_solve(a, rhs, double rtol=1e-13):
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] A = np.ascontiguousarray(a, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] B = np.ascontiguousarray(rhs, dtype=np.complex128)
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t m = A.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] X = np.empty((n, m), dtype=np.complex128)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] OK = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] L = np.zeros((m, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] av = A
    cdef double complex[:, ::1] bv = B
    cdef double complex[:, ::1] xv = X
    cdef double complex[:, ::1] lv = L
    cdef cnp.uint8_t[::1] okv = OK
    cdef Py_ssize_t p, i, j, k
    cdef double d, piv
    cdef double complex acc
    cdef bint good
    with nogil:
        for p in range(n):
            good = True
            for j in range(m):
                d = av[p, j, j].real
                piv = d
                for k in range(j):
                    piv = piv - (lv[j, k].real * lv[j, k].real + lv[j, k].imag * lv[j, k].imag)
                if not (piv > rtol * d):
                    good = False
                    break
                lv[j, j] = sqrt(piv)
                for i in range(j + 1, m):
                    acc = av[p, i, j]
                    for k in range(j):
                        acc = acc - lv[i, k] * lv[j, k].conjugate()
                    lv[i, j] = acc / lv[j, j].real
            if not good:
                for i in range(m):
                    xv[p, i] = NAN
                continue
            okv[p] = 1
            for i in range(m):
                acc = bv[p, i]
                for k in range(i):
                    acc = acc - lv[i, k] * xv[p, k]
                xv[p, i] = acc / lv[i, i].real
            for i in range(m - 1, -1, -1):
                acc = xv[p, i]
                for k in range(i + 1, m):
                    acc = acc - lv[k, i].conjugate() * xv[p, k]
                xv[p, i] = acc / lv[i, i].real
    return X, OK.astype(bool)
