"""Compiled per-step training loops.

These mirror ``Tracx2Net.gradients`` / ``SrnNet.gradients`` plus the weight
update, one pair at a time; the numpy methods stay the reference and the test
suite checks the two agree.
"""
import numpy as np
from numba import njit

SATURATION = 5.0


@njit(cache=True)
def _act(x):
    y = x / SATURATION
    if y > 1.0:
        return 1.0
    if y < -1.0:
        return -1.0
    return y


@njit(cache=True)
def _slope(x):
    if -SATURATION < x < SATURATION:
        return 1.0 / SATURATION
    return 0.0


@njit(cache=True)
def tracx2_train_sequence(W_ih, W_ho, idx, codes, lr, offset, temperature, gated, trace, trace_pos):
    """Train on one sequence of code indices in place.  Writes (E, delta) rows
    into ``trace`` from ``trace_pos`` when ``trace`` has room; returns the new position."""
    n = codes.shape[1]
    H = W_ih.shape[0]
    O = W_ho.shape[0]
    x = np.empty(2 * n)
    net_h = np.empty(H)
    hid = np.empty(H)
    net_o = np.empty(O)
    out = np.empty(O)
    g_o = np.empty(O)
    g_h = np.empty(H)
    lhs = codes[idx[0]].copy()
    for t in range(1, idx.shape[0]):
        for i in range(n):
            x[i] = lhs[i]
            x[n + i] = codes[idx[t], i]
        for h in range(H):
            s = 0.0
            for i in range(2 * n):
                s += W_ih[h, i] * x[i]
            s += W_ih[h, 2 * n]
            net_h[h] = s
            hid[h] = _act(s)
        E = 0.0
        for o in range(O):
            s = 0.0
            for h in range(H):
                s += W_ho[o, h] * hid[h]
            s += W_ho[o, H]
            net_o[o] = s
            out[o] = _act(s)
            E += abs(x[o] - out[o])
            g_o[o] = (out[o] - x[o]) * (_slope(s) + offset)
        E /= O
        for h in range(H):
            s = 0.0
            for o in range(O):
                s += W_ho[o, h] * g_o[o]
            g_h[h] = s * (_slope(net_h[h]) + offset)
        for o in range(O):
            for h in range(H):
                W_ho[o, h] -= lr * g_o[o] * hid[h]
            W_ho[o, H] -= lr * g_o[o]
        for h in range(H):
            for i in range(2 * n):
                W_ih[h, i] -= lr * g_h[h] * x[i]
            W_ih[h, 2 * n] -= lr * g_h[h]
        delta = np.tanh(temperature * E) if gated else 0.0
        for i in range(n):
            lhs[i] = (1.0 - delta) * hid[i] + delta * x[n + i]
        if trace_pos < trace.shape[0]:
            trace[trace_pos, 0] = E
            trace[trace_pos, 1] = delta
        trace_pos += 1
    return trace_pos


@njit(cache=True)
def srn_train_sequence(W, V, idx, codes, lr, offset, trace, trace_pos):
    n = codes.shape[1]
    H = W.shape[0]
    O = V.shape[0]
    x = np.empty(n + H)
    net_h = np.empty(H)
    hid = np.empty(H)
    out = np.empty(O)
    g_o = np.empty(O)
    g_h = np.empty(H)
    context = np.zeros(H)
    for t in range(idx.shape[0] - 1):
        for i in range(n):
            x[i] = codes[idx[t], i]
        for h in range(H):
            x[n + h] = context[h]
        for h in range(H):
            s = 0.0
            for i in range(n + H):
                s += W[h, i] * x[i]
            s += W[h, n + H]
            net_h[h] = s
            hid[h] = _act(s)
        E = 0.0
        for o in range(O):
            s = 0.0
            for h in range(H):
                s += V[o, h] * hid[h]
            s += V[o, H]
            out[o] = _act(s)
            target = codes[idx[t + 1], o]
            E += abs(target - out[o])
            g_o[o] = (out[o] - target) * (_slope(s) + offset)
        E /= O
        for h in range(H):
            s = 0.0
            for o in range(O):
                s += V[o, h] * g_o[o]
            g_h[h] = s * (_slope(net_h[h]) + offset)
        for o in range(O):
            for h in range(H):
                V[o, h] -= lr * g_o[o] * hid[h]
            V[o, H] -= lr * g_o[o]
        for h in range(H):
            for i in range(n + H):
                W[h, i] -= lr * g_h[h] * x[i]
            W[h, n + H] -= lr * g_h[h]
        for h in range(H):
            context[h] = hid[h]
        if trace_pos < trace.shape[0]:
            trace[trace_pos, 0] = E
            trace[trace_pos, 1] = np.nan
        trace_pos += 1
    return trace_pos
