# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrence kernels; same update and gate layout as gru_numpy."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sig(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def gru_forward(double[:, ::1] pre, double[:, ::1] u_rec, double[::1] h0,
                bint want_cache=False):
    cdef Py_ssize_t T = pre.shape[0]
    cdef Py_ssize_t d = h0.shape[0]
    if pre.shape[1] != 3 * d or u_rec.shape[0] != d or u_rec.shape[1] != 3 * d:
        raise ValueError("shape mismatch in gru_forward")

    H_arr = np.empty((T, d))
    U_arr = np.empty((T, d)) if want_cache else None
    R_arr = np.empty((T, d)) if want_cache else None
    C_arr = np.empty((T, d)) if want_cache else None
    Qc_arr = np.empty((T, d)) if want_cache else None
    q_arr = np.empty(3 * d)
    h_arr = np.array(h0, copy=True)

    cdef double[:, ::1] H = H_arr
    cdef double[:, ::1] U = U_arr if want_cache else H_arr
    cdef double[:, ::1] R = R_arr if want_cache else H_arr
    cdef double[:, ::1] C = C_arr if want_cache else H_arr
    cdef double[:, ::1] Qc = Qc_arr if want_cache else H_arr
    cdef double[::1] q = q_arr
    cdef double[::1] h = h_arr
    cdef Py_ssize_t t, i, j
    cdef double hi, u, r, c
    cdef bint cache = want_cache

    for t in range(T):
        for j in range(3 * d):
            q[j] = 0.0
        for i in range(d):
            hi = h[i]
            if hi != 0.0:
                for j in range(3 * d):
                    q[j] += hi * u_rec[i, j]
        for i in range(d):
            u = _sig(pre[t, i] + q[i])
            r = _sig(pre[t, d + i] + q[d + i])
            c = tanh(pre[t, 2 * d + i] + r * q[2 * d + i])
            h[i] = u * h[i] + (1.0 - u) * c
            H[t, i] = h[i]
            if cache:
                U[t, i] = u
                R[t, i] = r
                C[t, i] = c
                Qc[t, i] = q[2 * d + i]

    if want_cache:
        return H_arr, (U_arr, R_arr, C_arr, Qc_arr)
    return H_arr


def gru_backward(double[:, ::1] dH, double[:, ::1] u_rec, double[::1] h0,
                 double[:, ::1] H, cache):
    cdef Py_ssize_t T = dH.shape[0]
    cdef Py_ssize_t d = h0.shape[0]
    U_arr, R_arr, C_arr, Qc_arr = cache
    cdef double[:, ::1] U = U_arr
    cdef double[:, ::1] R = R_arr
    cdef double[:, ::1] C = C_arr
    cdef double[:, ::1] Qc = Qc_arr

    dpre_arr = np.empty((T, 3 * d))
    dqrec_arr = np.empty((T, 3 * d))
    carry_arr = np.zeros(d)
    dh_arr = np.empty(d)
    cdef double[:, ::1] dpre = dpre_arr
    cdef double[:, ::1] dqrec = dqrec_arr
    cdef double[::1] carry = carry_arr
    cdef double[::1] dh = dh_arr
    cdef Py_ssize_t t, i, j
    cdef double hp, du_pre, dc_pre, dr_pre, s

    for t in range(T - 1, -1, -1):
        for i in range(d):
            dh[i] = dH[t, i] + carry[i]
        for i in range(d):
            hp = H[t - 1, i] if t > 0 else h0[i]
            du_pre = dh[i] * (hp - C[t, i]) * U[t, i] * (1.0 - U[t, i])
            dc_pre = dh[i] * (1.0 - U[t, i]) * (1.0 - C[t, i] * C[t, i])
            dr_pre = dc_pre * Qc[t, i] * R[t, i] * (1.0 - R[t, i])
            dpre[t, i] = du_pre
            dpre[t, d + i] = dr_pre
            dpre[t, 2 * d + i] = dc_pre
            dqrec[t, i] = du_pre
            dqrec[t, d + i] = dr_pre
            dqrec[t, 2 * d + i] = dc_pre * R[t, i]
        for i in range(d):
            s = dh[i] * U[t, i]
            for j in range(3 * d):
                s += dqrec[t, j] * u_rec[i, j]
            carry[i] = s
    return dpre_arr, dqrec_arr, carry_arr
