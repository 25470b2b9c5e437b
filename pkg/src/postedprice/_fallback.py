"""Pure-Python implementations of the search kernels.

Same signatures and tie-breaking as the compiled ``_kernels`` module, so the
two backends return identical solutions. Inputs are expected pre-sorted by
the caller (the oracle orders users by value density).
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def knapsack_dp(weights, values, capacity):
    """0-1 knapsack over integer weights.

    Returns ``(best_value, chosen)`` where ``chosen`` is a boolean mask.
    Ties keep the item out, so the earliest optimal set wins.
    """
    weights = np.asarray(weights, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    n = len(weights)
    capacity = int(capacity)
    dp = np.zeros(capacity + 1)
    nbytes = (capacity + 1 + 7) // 8
    take = np.zeros((n, nbytes), dtype=np.uint8)
    for i in range(n):
        w = int(weights[i])
        if w > capacity:
            continue
        cand = dp[: capacity + 1 - w] + values[i]
        better = cand > dp[w:]
        dp[w:] = np.where(better, cand, dp[w:])
        row = np.zeros(capacity + 1, dtype=bool)
        row[w:] = better
        take[i] = np.packbits(row)
    chosen = np.zeros(n, dtype=bool)
    c = capacity
    for i in range(n - 1, -1, -1):
        if (take[i, c >> 3] >> (7 - (c & 7))) & 1:
            chosen[i] = True
            c -= int(weights[i])
    return float(dp[capacity]), chosen


def bnb_multi_resource(demands, values, tol):
    """Depth-first branch and bound for multi-resource 0-1 selection.

    Bound at each node: current value plus all remaining values.
    """
    demands = np.asarray(demands, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n, nres = demands.shape
    rows = [tuple(map(float, demands[i])) for i in range(n)]
    vals = [float(v) for v in values]
    suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + vals[i]
    limit = 1.0 + tol

    best = [0.0, np.zeros(n, dtype=bool)]
    taken = [False] * n

    def dfs(k, cur, used):
        if cur > best[0]:
            best[0] = cur
            best[1] = np.array(taken, dtype=bool)
        if k == n or cur + suffix[k] <= best[0]:
            return
        d = rows[k]
        nxt = tuple(u + x for u, x in zip(used, d))
        if all(u <= limit for u in nxt):
            taken[k] = True
            dfs(k + 1, cur + vals[k], nxt)
            taken[k] = False
        dfs(k + 1, cur, used)

    dfs(0, 0.0, (0.0,) * nres)
    return best[0], best[1]


def bnb_multi_slot(demands, values, slot_count, win_lo, win_hi, horizon, tol):
    """Depth-first branch and bound with slot-subset assignment.

    For an accepted user every ``slot_count``-subset of the feasible slots
    in its window ``[win_lo, win_hi]`` is tried, in lexicographic order.
    Bound: current value plus the values of remaining users that could
    still fit individually.

    Returns ``(best_value, chosen_mask, schedule)`` with ``schedule`` an
    ``(n, horizon)`` uint8 indicator matrix.
    """
    demands = np.asarray(demands, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n, nres = demands.shape
    horizon = int(horizon)
    limit = 1.0 + tol
    vals = [float(v) for v in values]
    counts = [int(c) for c in slot_count]
    lo = [int(x) for x in win_lo]
    hi = [int(x) for x in win_hi]
    demanded = [[r for r in range(nres) if demands[i, r] > 0.0] for i in range(n)]

    best_val = [0.0]
    best_chosen = [np.zeros(n, dtype=bool)]
    best_sched = [np.zeros((n, horizon), dtype=np.uint8)]
    sched = np.zeros((n, horizon), dtype=np.uint8)
    taken = np.zeros(n, dtype=bool)

    def feasible_slots(i, util):
        d = demands[i]
        out = []
        for t in range(lo[i], hi[i] + 1):
            ok = True
            for r in demanded[i]:
                if util[r, t] + d[r] > limit:
                    ok = False
                    break
            if ok:
                out.append(t)
        return out

    def dfs(k, cur, util):
        if cur > best_val[0]:
            best_val[0] = cur
            best_chosen[0] = taken.copy()
            best_sched[0] = sched.copy()
        if k == n:
            return
        bound = cur
        for j in range(k, n):
            if len(feasible_slots(j, util)) >= counts[j]:
                bound += vals[j]
        if bound <= best_val[0]:
            return
        feas = feasible_slots(k, util)
        m = counts[k]
        if len(feas) >= m:
            taken[k] = True
            d = demands[k][:, None]
            for combo in combinations(feas, m):
                cols = list(combo)
                nxt = util.copy()
                nxt[:, cols] += d
                sched[k, cols] = 1
                dfs(k + 1, cur + vals[k], nxt)
                sched[k, cols] = 0
                if bound <= best_val[0]:
                    break
            taken[k] = False
        if bound > best_val[0]:
            dfs(k + 1, cur, util)

    dfs(0, 0.0, np.zeros((nres, horizon)))
    return best_val[0], best_chosen[0], best_sched[0]
