"""Pure-numpy recurrence kernels; the reference the Cython build must match.

Gate layout along the width-3d axis is [update | reset | candidate]. The
input-side projections (x @ W_in + b) are computed by the caller as one
matmul; these kernels handle only the part that is sequential in time.

Cell update, with q = h_prev @ U:
    u = sigmoid(p_u + q_u)
    r = sigmoid(p_r + q_r)
    c = tanh(p_c + r * q_c)        # reset applied to the recurrent term
    h = u * h_prev + (1 - u) * c
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def gru_forward(pre: np.ndarray, u_rec: np.ndarray, h0: np.ndarray,
                want_cache: bool = False):
    """Run the recurrence over ``T`` steps.

    pre: (T, 3d) input-side pre-activations, u_rec: (d, 3d), h0: (d,).
    Returns H (T, d); with ``want_cache`` also the per-step gate values
    (update, reset, candidate, recurrent candidate pre-activation) needed
    for the backward pass.
    """
    T, three_d = pre.shape
    d = h0.shape[0]
    assert three_d == 3 * d and u_rec.shape == (d, three_d)
    H = np.empty((T, d))
    if want_cache:
        U = np.empty((T, d))
        R = np.empty((T, d))
        C = np.empty((T, d))
        Qc = np.empty((T, d))
    h = h0
    for t in range(T):
        q = h @ u_rec
        u = _sigmoid(pre[t, :d] + q[:d])
        r = _sigmoid(pre[t, d:2 * d] + q[d:2 * d])
        c = np.tanh(pre[t, 2 * d:] + r * q[2 * d:])
        h = u * h + (1.0 - u) * c
        H[t] = h
        if want_cache:
            U[t], R[t], C[t], Qc[t] = u, r, c, q[2 * d:]
    if want_cache:
        return H, (U, R, C, Qc)
    return H


def gru_backward(dH: np.ndarray, u_rec: np.ndarray, h0: np.ndarray,
                 H: np.ndarray, cache) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Backpropagate through time.

    dH is the gradient arriving at each hidden state from outside the
    recurrence. Returns (dpre, dqrec, dh0): gradients on the input-side
    pre-activations, on the recurrent pre-activations q = h_prev @ u_rec
    (so the caller can form dU as H_prev^T @ dqrec with one matmul), and
    on the initial state.
    """
    U, R, C, Qc = cache
    T, d = dH.shape
    dpre = np.empty((T, 3 * d))
    dqrec = np.empty((T, 3 * d))
    carry = np.zeros(d)
    for t in range(T - 1, -1, -1):
        h_prev = H[t - 1] if t > 0 else h0
        dh = dH[t] + carry
        du_pre = dh * (h_prev - C[t]) * U[t] * (1.0 - U[t])
        dc_pre = dh * (1.0 - U[t]) * (1.0 - C[t] * C[t])
        dr_pre = dc_pre * Qc[t] * R[t] * (1.0 - R[t])
        dpre[t, :d] = du_pre
        dpre[t, d:2 * d] = dr_pre
        dpre[t, 2 * d:] = dc_pre
        dqrec[t, :d] = du_pre
        dqrec[t, d:2 * d] = dr_pre
        dqrec[t, 2 * d:] = dc_pre * R[t]
        carry = dh * U[t] + dqrec[t] @ u_rec.T
    return dpre, dqrec, carry
