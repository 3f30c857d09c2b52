"""Pure numpy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable or when
``DGADETECT_PURE_PYTHON=1``. Signatures and semantics match the compiled
versions exactly.

LSTM layout: gates are stacked along the last axis in the order
input, forget, cell candidate, output. ``W`` is (d_emb, 4h), ``U`` is
(h, 4h), ``b`` is (4h,). Token id 0 is padding; padded steps leave the
row's state at zero and receive no gradient.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(E, W, U, b, ids, start):
    """Run the recurrence over ``ids[:, start:]``.

    Returns ``(acts, cs, hs)``: post-activation gates (T, B, 4h) and the
    cell and hidden states (T+1, B, h), index 0 being the zero state.
    """
    B, L = ids.shape
    h = U.shape[0]
    T = L - start
    acts = np.zeros((T, B, 4 * h))
    cs = np.zeros((T + 1, B, h))
    hs = np.zeros((T + 1, B, h))
    for t in range(T):
        tok = ids[:, start + t]
        live = tok != 0
        z = E[tok] @ W + hs[t] @ U + b
        a = np.empty_like(z)
        a[:, : 2 * h] = _sigmoid(z[:, : 2 * h])
        a[:, 2 * h: 3 * h] = np.tanh(z[:, 2 * h: 3 * h])
        a[:, 3 * h:] = _sigmoid(z[:, 3 * h:])
        i, f, g, o = a[:, :h], a[:, h: 2 * h], a[:, 2 * h: 3 * h], a[:, 3 * h:]
        c = f * cs[t] + i * g
        hh = o * np.tanh(c)
        a[~live] = 0.0
        c[~live] = 0.0
        hh[~live] = 0.0
        acts[t] = a
        cs[t + 1] = c
        hs[t + 1] = hh
    return acts, cs, hs


def lstm_backward(E, W, U, ids, start, acts, cs, hs, dh_last):
    """Backpropagate ``dh_last`` (B, h) through the cached recurrence.

    Returns ``(dE, dW, dU, db)``.
    """
    B, L = ids.shape
    h = U.shape[0]
    T = L - start
    dE = np.zeros_like(E)
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * h)
    dh = dh_last.copy()
    dc = np.zeros((B, h))
    dz = np.empty((B, 4 * h))
    for t in range(T - 1, -1, -1):
        tok = ids[:, start + t]
        live = tok != 0
        a = acts[t]
        i, f, g, o = a[:, :h], a[:, h: 2 * h], a[:, 2 * h: 3 * h], a[:, 3 * h:]
        tc = np.tanh(cs[t + 1])
        dc = dc + dh * o * (1.0 - tc * tc)
        dz[:, :h] = dc * g * i * (1.0 - i)
        dz[:, h: 2 * h] = dc * cs[t] * f * (1.0 - f)
        dz[:, 2 * h: 3 * h] = dc * i * (1.0 - g * g)
        dz[:, 3 * h:] = dh * tc * o * (1.0 - o)
        dz[~live] = 0.0
        dc = dc * f
        dc[~live] = 0.0
        dW += E[tok].T @ dz
        dU += hs[t].T @ dz
        db += dz.sum(axis=0)
        np.add.at(dE, tok[live], dz[live] @ W.T)
        dh = dz @ U.T
    return dE, dW, dU, db


def split_scores(x_sorted, y_sorted):
    """Scan split candidates of one feature, values pre-sorted ascending.

    Candidate k splits after position k (left = [0..k]) and is valid when
    ``x[k] != x[k+1]``. A split's quality is the rational
    S = (l0^2 + l1^2)/nl + (r0^2 + r1^2)/nr, whose maximum is the maximum
    Gini gain. Returns ``(k, s_num, s_den)`` for the best candidate with
    strictly positive gain (earliest k on exact ties) or ``(-1, 0, 1)``.
    All comparisons are exact integer comparisons.
    """
    n = len(y_sorted)
    if n < 2:
        return -1, 0, 1
    # int64 products stay exact while n**4 / 4 fits; beyond that use Python ints
    dtype = np.int64 if n <= 40000 else object
    y = np.asarray(y_sorted, dtype=np.int64).astype(dtype)
    l1 = np.cumsum(y)[:-1]
    nl = np.arange(1, n, dtype=np.int64).astype(dtype)
    l0 = nl - l1
    n1 = int(y.sum())
    n0 = n - n1
    r1 = n1 - l1
    r0 = n0 - l0
    nr = n - nl
    s_num = (l0 * l0 + l1 * l1) * nr + (r0 * r0 + r1 * r1) * nl
    s_den = nl * nr
    parent = n0 * n0 + n1 * n1
    ok = (x_sorted[:-1] != x_sorted[1:]) & (s_num * n > parent * s_den)
    cand = np.flatnonzero(ok)
    if cand.size == 0:
        return -1, 0, 1
    approx = s_num[cand].astype(np.float64) / s_den[cand].astype(np.float64)
    top = approx.max()
    near = cand[approx >= top * (1.0 - 1e-9)]
    best_k, best_num, best_den = -1, 0, 1
    for k in near:
        num, den = int(s_num[k]), int(s_den[k])
        if best_k < 0 or num * best_den > best_num * den:
            best_k, best_num, best_den = int(k), num, den
    return best_k, best_num, best_den


def forest_votes(feature, threshold, left, right, vote, roots, X):
    """Count trees voting DGA for every row of ``X`` (N, 2).

    Node arrays are the concatenation of all trees; ``feature < 0`` marks
    a leaf, whose ``vote`` is 1 when its DGA count beats its legit count.
    """
    N = X.shape[0]
    votes = np.zeros(N, dtype=np.int64)
    rows = np.arange(N)
    for root in roots:
        node = np.full(N, root, dtype=np.int64)
        while True:
            feat = feature[node]
            inner = feat >= 0
            if not inner.any():
                break
            at = node[inner]
            go_left = X[rows[inner], feat[inner]] <= threshold[at]
            node[inner] = np.where(go_left, left[at], right[at])
        votes += vote[node]
    return votes
