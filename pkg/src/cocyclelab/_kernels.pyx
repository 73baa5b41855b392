# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the orbit hot loops.

Mirrors ``cocyclelab._kernels_py`` exactly; see that module for the
contracts.  The matrices are small (d <= ~8) so the loops are written
plainly and rely on the chain length for the speedup.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, log, sqrt

cnp.import_array()

COMPILED = True


cdef inline void _matmul(const double[:, ::1] A, double[:, ::1] B, double[:, ::1] out,
                         Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(d):
        for j in range(d):
            acc = 0.0
            for k in range(d):
                acc += A[i, k] * B[k, j]
            out[i, j] = acc


cdef double _mgs_inplace(double[:, ::1] Q, double[::1] logs, Py_ssize_t d) noexcept nogil:
    # Modified Gram-Schmidt; returns the smallest diagonal (for rank checks).
    cdef Py_ssize_t i, j, k
    cdef double r, rmin
    rmin = INFINITY
    for j in range(d):
        for i in range(j):
            r = 0.0
            for k in range(d):
                r += Q[k, i] * Q[k, j]
            for k in range(d):
                Q[k, j] -= r * Q[k, i]
        r = 0.0
        for k in range(d):
            r += Q[k, j] * Q[k, j]
        r = sqrt(r)
        if r > 0.0:
            logs[j] = log(r)
            for k in range(d):
                Q[k, j] /= r
        else:
            logs[j] = -INFINITY
        if r < rmin:
            rmin = r
    return rmin


def mgs_qr(double[:, ::1] Q):
    cdef Py_ssize_t d = Q.shape[0]
    logs_arr = np.empty(d)
    cdef double[::1] logs = logs_arr
    with nogil:
        _mgs_inplace(Q, logs, d)
    return logs_arr


def qr_chain(const double[:, :, ::1] mats, double[:, ::1] Q, Py_ssize_t reorth, Py_ssize_t phase):
    cdef Py_ssize_t m = mats.shape[0]
    cdef Py_ssize_t d = Q.shape[0]
    cdef Py_ssize_t max_events = (m + phase) // reorth if reorth > 0 else 0
    events_arr = np.empty((max_events, d))
    tmp_arr = np.empty((d, d))
    cdef double[:, ::1] events = events_arr
    cdef double[:, ::1] tmp = tmp_arr
    cdef Py_ssize_t s, i, j, n_events = 0
    with nogil:
        for s in range(m):
            _matmul(mats[s], Q, tmp, d)
            for i in range(d):
                for j in range(d):
                    Q[i, j] = tmp[i, j]
            phase += 1
            if phase == reorth:
                _mgs_inplace(Q, events[n_events], d)
                n_events += 1
                phase = 0
    return phase, events_arr[:n_events]


def product_chain(const double[:, :, ::1] mats, double[:, ::1] M, double threshold=1e120):
    cdef Py_ssize_t m = mats.shape[0]
    cdef Py_ssize_t d = M.shape[0]
    tmp_arr = np.empty((d, d))
    cdef double[:, ::1] tmp = tmp_arr
    cdef double logscale = 0.0, a, v
    cdef double inv = 1.0 / threshold
    cdef Py_ssize_t s, i, j
    with nogil:
        for s in range(m):
            _matmul(mats[s], M, tmp, d)
            a = 0.0
            for i in range(d):
                for j in range(d):
                    M[i, j] = tmp[i, j]
                    v = fabs(tmp[i, j])
                    if v > a:
                        a = v
            if a > threshold or (a > 0.0 and a < inv):
                for i in range(d):
                    for j in range(d):
                        M[i, j] /= a
                logscale += log(a)
    return logscale


def back_solve_chain(const double[:, :, ::1] mats, double[:, ::1] M, double rcond=1e-12):
    # Per-factor solves need LAPACK; route through numpy per step.  This
    # path is never hot (n <= a few hundred), so no tight loop here.
    import numpy as _np
    logscale = 0.0
    Mb = _np.asarray(M)
    for s in range(mats.shape[0]):
        A = _np.asarray(mats[s])
        sv = _np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= rcond * max(sv[0], 1.0):
            raise ZeroDivisionError("singular factor in backward chain")
        Mb[...] = _np.linalg.solve(A, Mb)
        a = _np.max(_np.abs(Mb))
        if a > 1e120 or (0.0 < a < 1e-120):
            Mb /= a
            logscale += _np.log(a)
    return logscale


def vector_chain(const double[:, :, ::1] mats, double[::1] w):
    cdef Py_ssize_t m = mats.shape[0]
    cdef Py_ssize_t d = w.shape[0]
    tmp_arr = np.empty(d)
    cdef double[::1] tmp = tmp_arr
    cdef double logsum = 0.0, nrm, acc
    cdef Py_ssize_t s, i, k
    with nogil:
        for s in range(m):
            for i in range(d):
                acc = 0.0
                for k in range(d):
                    acc += mats[s, i, k] * w[k]
                tmp[i] = acc
            nrm = 0.0
            for i in range(d):
                nrm += tmp[i] * tmp[i]
            nrm = sqrt(nrm)
            if nrm == 0.0:
                for i in range(d):
                    w[i] = 0.0
                logsum = -INFINITY
                break
            logsum += log(nrm)
            for i in range(d):
                w[i] = tmp[i] / nrm
    return logsum


def frame_minmax_chain(const double[:, :, ::1] mats, double[:, ::1] W,
                       double[::1] logs, double[::1] minlog, double[::1] maxlog):
    cdef Py_ssize_t m = mats.shape[0]
    cdef Py_ssize_t d = W.shape[0]
    cdef Py_ssize_t G = W.shape[1]
    tmp_arr = np.empty((d, G))
    cdef double[:, ::1] tmp = tmp_arr
    cdef double acc, nrm
    cdef Py_ssize_t s, i, k, g
    with nogil:
        for s in range(m):
            for i in range(d):
                for g in range(G):
                    acc = 0.0
                    for k in range(d):
                        acc += mats[s, i, k] * W[k, g]
                    tmp[i, g] = acc
            for g in range(G):
                nrm = 0.0
                for i in range(d):
                    nrm += tmp[i, g] * tmp[i, g]
                nrm = sqrt(nrm)
                if nrm == 0.0:
                    logs[g] = -INFINITY
                    for i in range(d):
                        W[i, g] = 0.0
                else:
                    logs[g] += log(nrm)
                    for i in range(d):
                        W[i, g] = tmp[i, g] / nrm
                if logs[g] < minlog[g]:
                    minlog[g] = logs[g]
                if logs[g] > maxlog[g]:
                    maxlog[g] = logs[g]
