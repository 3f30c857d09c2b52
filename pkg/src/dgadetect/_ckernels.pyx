# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Same contracts as ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND = "cython"

cdef extern from *:
    """
    typedef __int128 i128;
    """
    ctypedef long long i128


cdef inline void gemm_rm(char ta, char tb, int M, int N, int K, double alpha,
                         double *A, int lda, double *B, int ldb, double beta,
                         double *C, int ldc) noexcept nogil:
    # row-major C = alpha * op(A) @ op(B) + beta * C via column-major BLAS
    dgemm(&tb, &ta, &N, &M, &K, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef inline double sigm(double z) noexcept nogil:
    return 1.0 / (1.0 + exp(-z))


def lstm_forward(double[:, ::1] E, double[:, ::1] W, double[:, ::1] U, double[::1] b,
                 cnp.int64_t[:, ::1] ids, Py_ssize_t start):
    cdef Py_ssize_t B = ids.shape[0], L = ids.shape[1]
    cdef Py_ssize_t d = E.shape[1], h = U.shape[0], H4 = 4 * U.shape[0]
    cdef Py_ssize_t T = L - start
    acts_np = np.zeros((T, B, H4))
    cs_np = np.zeros((T + 1, B, h))
    hs_np = np.zeros((T + 1, B, h))
    cdef double[:, :, ::1] acts = acts_np
    cdef double[:, :, ::1] cs = cs_np
    cdef double[:, :, ::1] hs = hs_np
    cdef double[:, ::1] X = np.empty((B, d))
    cdef double[:, ::1] Z = np.empty((B, H4))
    cdef Py_ssize_t t, r, j, k
    cdef cnp.int64_t tok
    cdef double ig, fg, gg, og, c
    with nogil:
        for t in range(T):
            for r in range(B):
                tok = ids[r, start + t]
                for k in range(d):
                    X[r, k] = E[tok, k]
                for j in range(H4):
                    Z[r, j] = b[j]
            gemm_rm(b'N', b'N', <int>B, <int>H4, <int>d, 1.0, &X[0, 0], <int>d,
                    &W[0, 0], <int>H4, 1.0, &Z[0, 0], <int>H4)
            if t > 0:
                gemm_rm(b'N', b'N', <int>B, <int>H4, <int>h, 1.0, &hs[t, 0, 0], <int>h,
                        &U[0, 0], <int>H4, 1.0, &Z[0, 0], <int>H4)
            for r in range(B):
                if ids[r, start + t] == 0:
                    continue
                for j in range(h):
                    ig = sigm(Z[r, j])
                    fg = sigm(Z[r, h + j])
                    gg = tanh(Z[r, 2 * h + j])
                    og = sigm(Z[r, 3 * h + j])
                    c = fg * cs[t, r, j] + ig * gg
                    acts[t, r, j] = ig
                    acts[t, r, h + j] = fg
                    acts[t, r, 2 * h + j] = gg
                    acts[t, r, 3 * h + j] = og
                    cs[t + 1, r, j] = c
                    hs[t + 1, r, j] = og * tanh(c)
    return acts_np, cs_np, hs_np


def lstm_backward(double[:, ::1] E, double[:, ::1] W, double[:, ::1] U,
                  cnp.int64_t[:, ::1] ids, Py_ssize_t start,
                  double[:, :, ::1] acts, double[:, :, ::1] cs, double[:, :, ::1] hs,
                  double[:, ::1] dh_last):
    cdef Py_ssize_t B = ids.shape[0], L = ids.shape[1]
    cdef Py_ssize_t d = E.shape[1], h = U.shape[0], H4 = 4 * U.shape[0]
    cdef Py_ssize_t T = L - start
    dE_np = np.zeros((E.shape[0], d))
    dW_np = np.zeros((d, H4))
    dU_np = np.zeros((h, H4))
    db_np = np.zeros(H4)
    cdef double[:, ::1] dE = dE_np
    cdef double[:, ::1] dW = dW_np
    cdef double[:, ::1] dU = dU_np
    cdef double[::1] db = db_np
    cdef double[:, ::1] dh = np.array(dh_last, copy=True)
    cdef double[:, ::1] dc = np.zeros((B, h))
    cdef double[:, ::1] dz = np.empty((B, H4))
    cdef double[:, ::1] X = np.empty((B, d))
    cdef double[:, ::1] dX = np.empty((B, d))
    cdef Py_ssize_t t, r, j, k
    cdef cnp.int64_t tok
    cdef double ig, fg, gg, og, tc, dcv
    with nogil:
        for t in range(T - 1, -1, -1):
            for r in range(B):
                tok = ids[r, start + t]
                for k in range(d):
                    X[r, k] = E[tok, k]
                if tok == 0:
                    for j in range(H4):
                        dz[r, j] = 0.0
                    for j in range(h):
                        dc[r, j] = 0.0
                    continue
                for j in range(h):
                    ig = acts[t, r, j]
                    fg = acts[t, r, h + j]
                    gg = acts[t, r, 2 * h + j]
                    og = acts[t, r, 3 * h + j]
                    tc = tanh(cs[t + 1, r, j])
                    dcv = dc[r, j] + dh[r, j] * og * (1.0 - tc * tc)
                    dz[r, j] = dcv * gg * ig * (1.0 - ig)
                    dz[r, h + j] = dcv * cs[t, r, j] * fg * (1.0 - fg)
                    dz[r, 2 * h + j] = dcv * ig * (1.0 - gg * gg)
                    dz[r, 3 * h + j] = dh[r, j] * tc * og * (1.0 - og)
                    dc[r, j] = dcv * fg
            gemm_rm(b'T', b'N', <int>d, <int>H4, <int>B, 1.0, &X[0, 0], <int>d,
                    &dz[0, 0], <int>H4, 1.0, &dW[0, 0], <int>H4)
            gemm_rm(b'T', b'N', <int>h, <int>H4, <int>B, 1.0, &hs[t, 0, 0], <int>h,
                    &dz[0, 0], <int>H4, 1.0, &dU[0, 0], <int>H4)
            gemm_rm(b'N', b'T', <int>B, <int>d, <int>H4, 1.0, &dz[0, 0], <int>H4,
                    &W[0, 0], <int>H4, 0.0, &dX[0, 0], <int>d)
            for r in range(B):
                for j in range(H4):
                    db[j] += dz[r, j]
                tok = ids[r, start + t]
                if tok != 0:
                    for k in range(d):
                        dE[tok, k] += dX[r, k]
            if t > 0:
                gemm_rm(b'N', b'T', <int>B, <int>h, <int>H4, 1.0, &dz[0, 0], <int>H4,
                        &U[0, 0], <int>H4, 0.0, &dh[0, 0], <int>h)
    return dE_np, dW_np, dU_np, db_np


def split_scores(double[::1] x_sorted, y_sorted):
    cdef cnp.int64_t[::1] y = np.ascontiguousarray(y_sorted, dtype=np.int64)
    cdef Py_ssize_t n = y.shape[0]
    if n < 2:
        return -1, 0, 1
    cdef Py_ssize_t k
    cdef i128 n1 = 0, n0, l0 = 0, l1 = 0, r0, r1, nl, nr, num, den, parent
    cdef i128 best_num = 0, best_den = 1
    cdef Py_ssize_t best_k = -1
    for k in range(n):
        n1 += y[k]
    n0 = n - n1
    parent = n0 * n0 + n1 * n1
    with nogil:
        for k in range(n - 1):
            if y[k]:
                l1 += 1
            else:
                l0 += 1
            if x_sorted[k] == x_sorted[k + 1]:
                continue
            nl = k + 1
            nr = n - nl
            r0 = n0 - l0
            r1 = n1 - l1
            num = (l0 * l0 + l1 * l1) * nr + (r0 * r0 + r1 * r1) * nl
            den = nl * nr
            if num * n <= parent * den:
                continue
            if best_k < 0 or num * best_den > best_num * den:
                best_k = k
                best_num = num
                best_den = den
    if best_k < 0:
        return -1, 0, 1
    # i128 values here are bounded by n**3 and fit a signed 64-bit integer
    return best_k, int(<long long>best_num), int(<long long>best_den)


def forest_votes(cnp.int64_t[::1] feature, double[::1] threshold, cnp.int64_t[::1] left,
                 cnp.int64_t[::1] right, cnp.int64_t[::1] vote, cnp.int64_t[::1] roots,
                 double[:, ::1] X):
    cdef Py_ssize_t N = X.shape[0], T = roots.shape[0]
    votes_np = np.zeros(N, dtype=np.int64)
    cdef cnp.int64_t[::1] votes = votes_np
    cdef Py_ssize_t r, t
    cdef cnp.int64_t node
    with nogil:
        for r in range(N):
            for t in range(T):
                node = roots[t]
                while feature[node] >= 0:
                    if X[r, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                votes[r] += vote[node]
    return votes_np
