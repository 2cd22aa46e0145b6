# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward/backward sweeps over a topologically ordered DAG.

See ``_kernels_py.sweep`` for the meaning of each returned array; both
implementations must agree to rounding.
"""

import numpy as np

from libc.math cimport exp, INFINITY
from libc.stdint cimport int64_t


def sweep(const int64_t[::1] succ_ptr, const int64_t[::1] succ_idx,
          const int64_t[::1] pred_ptr, const int64_t[::1] pred_idx,
          const double[::1] v, const double[:, ::1] h, double mu, double zsink):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t m = h.shape[1]
    phi_a = np.empty(n)
    zhat_a = np.empty(n)
    chat_a = np.zeros((n, m))
    psi_a = np.empty(n)
    ahat_a = np.empty(n)
    bhat_a = np.zeros((n, m))
    cdef double[::1] phi = phi_a
    cdef double[::1] zhat = zhat_a
    cdef double[:, ::1] chat = chat_a
    cdef double[::1] psi = psi_a
    cdef double[::1] ahat = ahat_a
    cdef double[:, ::1] bhat = bhat_a
    cdef double inv = 1.0 / mu
    cdef double best, w, z, a, cand
    cdef Py_ssize_t i, c
    cdef int64_t k, j

    with nogil:
        phi[n - 1] = 0.0
        zhat[n - 1] = zsink
        for c in range(m):
            chat[n - 1, c] = h[n - 1, c] * zsink
        for i in range(n - 2, -1, -1):
            best = -INFINITY
            for k in range(succ_ptr[i], succ_ptr[i + 1]):
                j = succ_idx[k]
                if phi[j] > best:
                    best = phi[j]
            z = 0.0
            for k in range(succ_ptr[i], succ_ptr[i + 1]):
                j = succ_idx[k]
                w = exp((phi[j] - best) * inv)
                z += w * zhat[j]
                for c in range(m):
                    chat[i, c] += w * chat[j, c]
            phi[i] = v[i] + best
            zhat[i] = z
            for c in range(m):
                chat[i, c] += h[i, c] * z

        psi[0] = 0.0
        ahat[0] = 1.0
        for i in range(1, n):
            best = -INFINITY
            for k in range(pred_ptr[i], pred_ptr[i + 1]):
                j = pred_idx[k]
                cand = psi[j] + v[j]
                if cand > best:
                    best = cand
            a = 0.0
            for k in range(pred_ptr[i], pred_ptr[i + 1]):
                j = pred_idx[k]
                w = exp((psi[j] + v[j] - best) * inv)
                a += w * ahat[j]
                for c in range(m):
                    bhat[i, c] += w * (bhat[j, c] + h[j, c] * ahat[j])
            psi[i] = best
            ahat[i] = a
    return phi_a, zhat_a, chat_a, psi_a, ahat_a, bhat_a
