"""Pure-numpy LSTM kernels (fallback backend).

Layout conventions, shared with the numba backend:

  * time-major batches: index/label arrays are (T, B), state caches (T, B, H)
  * the fused gate axis is 4H wide, ordered input | forget | candidate | output
  * inputs are one-hot by construction, so the input-to-hidden product is a
    row gather of ``wx`` ((2E, 4H)) at the encoded interaction index
  * ``wy`` is stored one row per exercise ((E, H)) so target lookups are
    first-axis gathers

Padded steps (mask 0) still run the recurrence but contribute nothing to the
loss, and the backward recursion therefore propagates exact zeros through
them; gradients are unaffected by padding.
"""

import numpy as np

PROB_CLAMP = 1e-7


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def output_probs(h, wy, by):
    """Full next-step correctness probability vector for one hidden state."""
    return sigmoid(wy @ h + by)


def lstm_step(k, h, c, wx, wh, b):
    """Advance hidden/cell state by one interaction with one-hot index ``k``."""
    H = h.shape[0]
    pre = wx[k] + h @ wh + b
    i = sigmoid(pre[:H])
    f = sigmoid(pre[H : 2 * H])
    g = np.tanh(pre[2 * H : 3 * H])
    o = sigmoid(pre[3 * H :])
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


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
        probs[t] = sigmoid(wy @ h + by)
    return probs


def lstm_forward_train(x_idx, targets, labels, mask, wx, wh, b, wy, by):
    """Batched forward pass scoring only the next exercise actually attempted.

    Returns (loss, p, hs, cs, gates) where ``p[t, b]`` is the predicted
    correctness probability of ``targets[t, b]`` after consuming interaction
    ``x_idx[t, b]``, and loss is the masked mean binary cross-entropy.
    """
    T, B = x_idx.shape
    H = wh.shape[0]
    hs = np.empty((T, B, H))
    cs = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))
    p = np.empty((T, B))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        pre = wx[x_idx[t]] + h @ wh + b
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
        tgt = targets[t]
        p[t] = sigmoid(np.sum(wy[tgt] * h, axis=1) + by[tgt])
    n_valid = mask.sum()
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = -(mask * (labels * np.log(pc) + (1.0 - labels) * np.log1p(-pc))).sum()
    return float(loss / n_valid), p, hs, cs, gates


def lstm_backward_train(x_idx, targets, labels, mask, p, hs, cs, gates, wx, wh, b, wy, by):
    """Backpropagation through time for `lstm_forward_train`.

    Returns parameter gradients (dwx, dwh, db, dwy, dby) of the masked mean
    cross-entropy loss.
    """
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
    dpre = np.empty((B, 4 * H))
    zeros_bh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        tgt = targets[t]
        h = hs[t]
        dlogit = (p[t] - labels[t]) * mask[t] / n_valid
        np.add.at(dwy, tgt, dlogit[:, None] * h)
        np.add.at(dby, tgt, dlogit)
        dh = dlogit[:, None] * wy[tgt] + dh_carry

        i = gates[t, :, :H]
        f = gates[t, :, H : 2 * H]
        g = gates[t, :, 2 * H : 3 * H]
        o = gates[t, :, 3 * H :]
        tc = np.tanh(cs[t])
        c_prev = cs[t - 1] if t > 0 else zeros_bh
        h_prev = hs[t - 1] if t > 0 else zeros_bh

        dc = dh * o * (1.0 - tc * tc) + dc_carry
        dpre[:, :H] = dc * g * i * (1.0 - i)
        dpre[:, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dpre[:, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dpre[:, 3 * H :] = dh * tc * o * (1.0 - o)
        dc_carry = dc * f

        np.add.at(dwx, x_idx[t], dpre)
        dwh += h_prev.T @ dpre
        db += dpre.sum(axis=0)
        dh_carry = dpre @ wh.T
    return dwx, dwh, db, dwy, dby
