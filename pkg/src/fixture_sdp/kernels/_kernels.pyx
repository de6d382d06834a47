# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled layout evaluation: one small Cholesky solve per fixture subset."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "cython"


cdef int _chol_solve(double[:, ::1] M, double[::1] rhs, Py_ssize_t n) noexcept nogil:
    # In-place lower Cholesky of M[:n, :n]; rhs overwritten with the solution.
    cdef Py_ssize_t i, j, k
    cdef double acc
    for j in range(n):
        acc = M[j, j]
        for k in range(j):
            acc -= M[j, k] * M[j, k]
        if acc <= 0.0:
            return -1
        M[j, j] = sqrt(acc)
        for i in range(j + 1, n):
            acc = M[i, j]
            for k in range(j):
                acc -= M[i, k] * M[j, k]
            M[i, j] = acc / M[j, j]
    for i in range(n):
        acc = rhs[i]
        for k in range(i):
            acc -= M[i, k] * rhs[k]
        rhs[i] = acc / M[i, i]
    for i in range(n - 1, -1, -1):
        acc = rhs[i]
        for k in range(i + 1, n):
            acc -= M[k, i] * rhs[k]
        rhs[i] = acc / M[i, i]
    return 0


def evaluate_subsets(double[:, ::1] G, double[::1] c, double[:, ::1] Bt,
                     double[::1] ut, double[::1] wt, cnp.int64_t[:, ::1] subsets):
    cdef Py_ssize_t n_sub = subsets.shape[0]
    cdef Py_ssize_t k = subsets.shape[1]
    cdef Py_ssize_t n = 3 * k
    cdef Py_ssize_t nt = Bt.shape[0]
    cdef Py_ssize_t s, a, b, row, node
    cdef double acc, d2, mx, ux, uy, uz, nrm
    cdef int status = 0
    delta_np = np.empty(n_sub)
    maxdef_np = np.empty(n_sub)
    cdef double[::1] delta = delta_np
    cdef double[::1] maxdef = maxdef_np
    cdef double[:, ::1] M = np.empty((n, n))
    cdef double[::1] r = np.empty(n)
    cdef cnp.int64_t[::1] idx = np.empty(n, dtype=np.int64)
    cdef double[::1] U = np.empty(nt)
    with nogil:
        for s in range(n_sub):
            for a in range(k):
                for b in range(3):
                    idx[3 * a + b] = 3 * subsets[s, a] + b
            for a in range(n):
                r[a] = -c[idx[a]]
                for b in range(a + 1):
                    M[a, b] = G[idx[a], idx[b]]
            if _chol_solve(M, r, n) != 0:
                status = -1
                break
            d2 = 0.0
            mx = 0.0
            for row in range(nt):
                acc = ut[row]
                for a in range(n):
                    acc += Bt[row, idx[a]] * r[a]
                U[row] = acc
                d2 += wt[row] * acc * acc
            for node in range(nt // 3):
                ux = U[3 * node]
                uy = U[3 * node + 1]
                uz = U[3 * node + 2]
                nrm = sqrt(ux * ux + uy * uy + uz * uz)
                if nrm > mx:
                    mx = nrm
            delta[s] = d2
            maxdef[s] = mx
    if status != 0:
        raise np.linalg.LinAlgError("fixture compliance block is not positive definite")
    return delta_np, maxdef_np
