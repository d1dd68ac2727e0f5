"""Numba-jitted LSTM kernels.

Same contracts and array layouts as `numpy_backend`; scatter-adds and the
per-target output head are written as explicit loops, which numba compiles
to tight machine code. All kernels are cached on disk so repeat processes
skip compilation.
"""

import numpy as np
from numba import njit

PROB_CLAMP = 1e-7


@njit(cache=True)
def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@njit(cache=True)
def output_probs(h, wy, by):
    """Full next-step correctness probability vector for one hidden state."""
    return sigmoid(np.dot(wy, h) + by)


@njit(cache=True)
def lstm_step(k, h, c, wx, wh, b):
    """Advance hidden/cell state by one interaction with one-hot index ``k``."""
    H = h.shape[0]
    pre = wx[k] + np.dot(h, wh) + b
    i = sigmoid(pre[:H])
    f = sigmoid(pre[H : 2 * H])
    g = np.tanh(pre[2 * H : 3 * H])
    o = sigmoid(pre[3 * H :])
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


@njit(cache=True)
def lstm_forward_probs(x_idx, wx, wh, b, wy, by):
    """Run one sequence; return the (T, E) next-step probability vectors."""
    T = x_idx.shape[0]
    H = wh.shape[0]
    E = wy.shape[0]
    probs = np.empty((T, E))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        h, c = lstm_step(x_idx[t], h, c, wx, wh, b)
        probs[t] = sigmoid(np.dot(wy, h) + by)
    return probs


@njit(cache=True)
def lstm_forward_train(x_idx, targets, labels, mask, wx, wh, b, wy, by):
    """Batched forward pass scoring only the next exercise actually attempted.

    Returns (loss, p, hs, cs, gates); see the numpy backend for semantics.
    """
    T, B = x_idx.shape
    H = wh.shape[0]
    hs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))
    p = np.empty((T, B))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    loss = 0.0
    n_valid = 0.0
    for t in range(T):
        pre = wx[x_idx[t]] + np.dot(h, wh)
        for bi in range(B):
            pre[bi] += b
        i = sigmoid(pre[:, :H])
        f = sigmoid(pre[:, H : 2 * H])
        g = np.tanh(pre[:, 2 * H : 3 * H])
        o = sigmoid(pre[:, 3 * H :])
        c = f * c + i * g
        h = o * np.tanh(c)
        gates[t, :, :H] = i
        gates[t, :, H : 2 * H] = f
        gates[t, :, 2 * H : 3 * H] = g
        gates[t, :, 3 * H :] = o
        hs[t] = h
        cs[t] = c
        for bi in range(B):
            tgt = targets[t, bi]
            logit = np.dot(wy[tgt], h[bi]) + by[tgt]
            pv = 1.0 / (1.0 + np.exp(-logit))
            p[t, bi] = pv
            m = mask[t, bi]
            if m > 0.0:
                pc = min(max(pv, PROB_CLAMP), 1.0 - PROB_CLAMP)
                a = labels[t, bi]
                loss -= m * (a * np.log(pc) + (1.0 - a) * np.log1p(-pc))
                n_valid += m
    return loss / n_valid, p, hs, cs, gates


@njit(cache=True)
def lstm_backward_train(x_idx, targets, labels, mask, p, hs, cs, gates, wx, wh, b, wy, by):
    """Backpropagation through time for `lstm_forward_train`."""
    T, B = x_idx.shape
    H = wh.shape[0]
    dwx = np.zeros_like(wx)
    dwh = np.zeros_like(wh)
    db = np.zeros_like(b)
    dwy = np.zeros_like(wy)
    dby = np.zeros_like(by)
    n_valid = mask.sum()
    dh_carry = np.zeros((B, H))
    dc_carry = np.zeros((B, H))
    dh = np.empty((B, H))
    dpre = np.empty((B, 4 * H))
    zeros_bh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        h = hs[t]
        for bi in range(B):
            tgt = targets[t, bi]
            dlogit = (p[t, bi] - labels[t, bi]) * mask[t, bi] / n_valid
            for j in range(H):
                dwy[tgt, j] += dlogit * h[bi, j]
                dh[bi, j] = dlogit * wy[tgt, j] + dh_carry[bi, j]
            dby[tgt] += dlogit

        i = gates[t, :, :H]
        f = gates[t, :, H : 2 * H]
        g = gates[t, :, 2 * H : 3 * H]
        o = gates[t, :, 3 * H :]
        tc = np.tanh(cs[t])
        if t > 0:
            c_prev = cs[t - 1]
            h_prev = hs[t - 1]
        else:
            c_prev = zeros_bh
            h_prev = zeros_bh

        dc = dh * o * (1.0 - tc * tc) + dc_carry
        dpre[:, :H] = dc * g * i * (1.0 - i)
        dpre[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dpre[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dpre[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc_carry = dc * f

        for bi in range(B):
            k = x_idx[t, bi]
            for j in range(4 * H):
                dwx[k, j] += dpre[bi, j]
                db[j] += dpre[bi, j]
        dwh += np.dot(h_prev.T, dpre)
        dh_carry = np.dot(dpre, wh.T)
    return dwx, dwh, db, dwy, dby
