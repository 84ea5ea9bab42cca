"""Compiled inner loop of the repeated auction.

Mechanisms arrive as flattened tables ``alloc[s, i, profile]`` and
``pay[s, i, profile]`` for every schedule segment ``s``; a profile's flat
index is ``sum_j b_j * strides[j]``.
"""

import math

import numpy as np
from numba import njit

MWU, EPS_GREEDY, FIXED = 0, 1, 2


@njit(cache=True)
def learner_weights(U, cap, kind, eta, eps_power, fixed_bid, t, out):
    """Fill ``out[:cap+1]`` with unnormalized weights for round ``t`` (1-based); return their sum."""
    if kind == MWU:
        m = U[0]
        for b in range(1, cap + 1):
            if U[b] > m:
                m = U[b]
        s = 0.0
        for b in range(cap + 1):
            w = math.exp(eta * (U[b] - m))
            out[b] = w
            s += w
        return s
    if kind == EPS_GREEDY:
        eps = min(1.0, t ** (-eps_power))
        m = U[0]
        for b in range(1, cap + 1):
            if U[b] > m:
                m = U[b]
        n_lead = 0
        for b in range(cap + 1):
            if U[b] == m:
                n_lead += 1
        s = 0.0
        for b in range(cap + 1):
            p = eps / (cap + 1)
            if U[b] == m:
                p += (1.0 - eps) / n_lead
            out[b] = p
            s += p
        return s
    for b in range(cap + 1):
        out[b] = 0.0
    out[fixed_bid] = 1.0
    return 1.0


@njit(cache=True)
def run_chunk(alloc, pay, seg_start, values, caps, kinds, etas, eps_powers, fixed_bids,
              strides, U, realized, t0, t1, uniforms, revenue,
              snap_rounds, snaps, snap_ptr,
              trace_stride, horizon, tr_round, tr_action, tr_probs, tr_cum, tr_util, tr_ptr):
    n = caps.shape[0]
    A = U.shape[1]
    w = np.zeros((n, A))
    sums = np.zeros(n)
    bids = np.zeros(n, np.int64)
    n_seg = seg_start.shape[0]
    seg = 0
    while seg + 1 < n_seg and seg_start[seg + 1] <= t0:
        seg += 1
    for t in range(t0, t1):
        while seg + 1 < n_seg and seg_start[seg + 1] <= t:
            seg += 1
        rnd = t + 1
        for i in range(n):
            cap = caps[i]
            s = learner_weights(U[i], cap, kinds[i], etas[i], eps_powers[i], fixed_bids[i], rnd, w[i])
            sums[i] = s
            r = uniforms[i, t - t0] * s
            acc = 0.0
            k = cap
            for b in range(cap + 1):
                acc += w[i, b]
                if r < acc:
                    k = b
                    break
            bids[i] = k
        sp = snap_ptr[0]
        if sp < snap_rounds.shape[0] and snap_rounds[sp] == rnd:
            for i in range(n):
                for b in range(caps[i] + 1):
                    snaps[sp, i, b] = w[i, b] / sums[i]
            snap_ptr[0] = sp + 1
        record = trace_stride > 0 and (t % trace_stride == 0 or t == horizon - 1)
        tp = tr_ptr[0]
        if record:
            tr_round[tp] = rnd
            for i in range(n):
                tr_action[tp, i] = bids[i]
                for b in range(caps[i] + 1):
                    tr_probs[tp, i, b] = w[i, b] / sums[i]
                    tr_cum[tp, i, b] = U[i, b]
            tr_ptr[0] = tp + 1

        prof = 0
        for i in range(n):
            prof += bids[i] * strides[i]
        rev = 0.0
        for i in range(n):
            rev += pay[seg, i, prof]
        revenue[t] = rev
        for i in range(n):
            base = prof - bids[i] * strides[i]
            v = values[i]
            for b in range(caps[i] + 1):
                j = base + b * strides[i]
                u = v * alloc[seg, i, j] - pay[seg, i, j]
                U[i, b] += u
                if b == bids[i]:
                    realized[i] += u
                    if record:
                        tr_util[tp, i] = u
