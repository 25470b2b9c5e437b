# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernels; see ``_fallback`` for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def knapsack_dp(weights, values, capacity):
    cdef cnp.int64_t[::1] w = np.ascontiguousarray(weights, dtype=np.int64)
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t cap = int(capacity)
    cdef Py_ssize_t nbytes = (cap + 1 + 7) // 8
    cdef double[::1] dp = np.zeros(cap + 1)
    take_arr = np.zeros((n, nbytes), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] take = take_arr
    cdef Py_ssize_t i, c, wi
    cdef double cand, vi
    for i in range(n):
        wi = w[i]
        if wi > cap:
            continue
        vi = v[i]
        c = cap
        while c >= wi:
            cand = dp[c - wi] + vi
            if cand > dp[c]:
                dp[c] = cand
                take[i, c >> 3] |= <cnp.uint8_t>(0x80 >> (c & 7))
            c -= 1
    chosen = np.zeros(n, dtype=bool)
    c = cap
    for i in range(n - 1, -1, -1):
        if (take[i, c >> 3] >> (7 - (c & 7))) & 1:
            chosen[i] = True
            c -= w[i]
    return float(dp[cap]), chosen


cdef class _ResourceSearch:
    cdef double[:, ::1] d
    cdef double[::1] v
    cdef double[::1] suffix
    cdef double[:, ::1] used      # row k = usage before deciding user k
    cdef cnp.uint8_t[::1] taken
    cdef cnp.uint8_t[::1] best_taken
    cdef double best
    cdef double limit
    cdef Py_ssize_t n, nres

    def __init__(self, demands, values, double tol):
        self.d = np.ascontiguousarray(demands, dtype=np.float64)
        self.v = np.ascontiguousarray(values, dtype=np.float64)
        self.n = self.d.shape[0]
        self.nres = self.d.shape[1]
        self.suffix = np.zeros(self.n + 1)
        cdef Py_ssize_t i
        for i in range(self.n - 1, -1, -1):
            self.suffix[i] = self.suffix[i + 1] + self.v[i]
        self.used = np.zeros((self.n + 1, self.nres))
        self.taken = np.zeros(self.n, dtype=np.uint8)
        self.best_taken = np.zeros(self.n, dtype=np.uint8)
        self.best = 0.0
        self.limit = 1.0 + tol

    cdef void dfs(self, Py_ssize_t k, double cur):
        cdef Py_ssize_t r
        cdef bint fits
        if cur > self.best:
            self.best = cur
            self.best_taken[:] = self.taken
        if k == self.n or cur + self.suffix[k] <= self.best:
            return
        fits = True
        for r in range(self.nres):
            self.used[k + 1, r] = self.used[k, r] + self.d[k, r]
            if self.used[k + 1, r] > self.limit:
                fits = False
        if fits:
            self.taken[k] = 1
            self.dfs(k + 1, cur + self.v[k])
            self.taken[k] = 0
        for r in range(self.nres):
            self.used[k + 1, r] = self.used[k, r]
        self.dfs(k + 1, cur)


def bnb_multi_resource(demands, values, tol):
    s = _ResourceSearch(demands, values, tol)
    s.dfs(0, 0.0)
    return float(s.best), np.asarray(s.best_taken).astype(bool)


cdef class _SlotSearch:
    cdef double[:, ::1] d
    cdef double[::1] v
    cdef Py_ssize_t[::1] cnt
    cdef Py_ssize_t[::1] lo
    cdef Py_ssize_t[::1] hi
    cdef double[:, :, ::1] util   # util[k] = utilization before deciding user k
    cdef Py_ssize_t[:, ::1] feas   # feas[k] = feasible slots of user k at depth k
    cdef Py_ssize_t[:, ::1] idx    # idx[k] = current combination (indices into feas[k])
    cdef cnp.uint8_t[:, ::1] sched
    cdef cnp.uint8_t[:, ::1] best_sched
    cdef cnp.uint8_t[::1] taken
    cdef cnp.uint8_t[::1] best_taken
    cdef double best
    cdef double limit
    cdef Py_ssize_t n, nres, horizon

    def __init__(self, demands, values, slot_count, win_lo, win_hi, horizon, double tol):
        self.d = np.ascontiguousarray(demands, dtype=np.float64)
        self.v = np.ascontiguousarray(values, dtype=np.float64)
        self.cnt = np.ascontiguousarray(slot_count, dtype=np.intp)
        self.lo = np.ascontiguousarray(win_lo, dtype=np.intp)
        self.hi = np.ascontiguousarray(win_hi, dtype=np.intp)
        self.n = self.d.shape[0]
        self.nres = self.d.shape[1]
        self.horizon = int(horizon)
        self.util = np.zeros((self.n + 1, self.nres, self.horizon))
        self.feas = np.zeros((self.n + 1, self.horizon + 1), dtype=np.intp)
        self.idx = np.zeros((self.n + 1, self.horizon + 1), dtype=np.intp)
        self.sched = np.zeros((self.n, self.horizon), dtype=np.uint8)
        self.best_sched = np.zeros((self.n, self.horizon), dtype=np.uint8)
        self.taken = np.zeros(self.n, dtype=np.uint8)
        self.best_taken = np.zeros(self.n, dtype=np.uint8)
        self.best = 0.0
        self.limit = 1.0 + tol

    cdef inline bint slot_ok(self, Py_ssize_t k, Py_ssize_t j, Py_ssize_t t):
        # user j fits slot t under the utilization snapshot of depth k
        cdef Py_ssize_t r
        cdef double dj
        for r in range(self.nres):
            dj = self.d[j, r]
            if dj > 0.0 and self.util[k, r, t] + dj > self.limit:
                return False
        return True

    cdef Py_ssize_t count_feasible(self, Py_ssize_t k, Py_ssize_t j, bint store):
        cdef Py_ssize_t t, f = 0
        for t in range(self.lo[j], self.hi[j] + 1):
            if self.slot_ok(k, j, t):
                if store:
                    self.feas[k, f] = t
                f += 1
        return f

    cdef void dfs(self, Py_ssize_t k, double cur):
        cdef Py_ssize_t j, r, t, f, m, p, q
        cdef double bound
        if cur > self.best:
            self.best = cur
            self.best_taken[:] = self.taken
            self.best_sched[:, :] = self.sched
        if k == self.n:
            return
        bound = cur
        for j in range(k, self.n):
            if self.count_feasible(k, j, False) >= self.cnt[j]:
                bound += self.v[j]
        if bound <= self.best:
            return
        f = self.count_feasible(k, k, True)
        m = self.cnt[k]
        if f >= m:
            self.taken[k] = 1
            for p in range(m):
                self.idx[k, p] = p
            while True:
                self.util[k + 1, :, :] = self.util[k, :, :]
                for p in range(m):
                    t = self.feas[k, self.idx[k, p]]
                    for r in range(self.nres):
                        self.util[k + 1, r, t] += self.d[k, r]
                    self.sched[k, t] = 1
                self.dfs(k + 1, cur + self.v[k])
                for p in range(m):
                    self.sched[k, self.feas[k, self.idx[k, p]]] = 0
                if bound <= self.best:
                    break
                # next lexicographic combination of m indices out of f
                p = m - 1
                while p >= 0 and self.idx[k, p] == f - m + p:
                    p -= 1
                if p < 0:
                    break
                self.idx[k, p] += 1
                for q in range(p + 1, m):
                    self.idx[k, q] = self.idx[k, q - 1] + 1
            self.taken[k] = 0
        if bound > self.best:
            self.util[k + 1, :, :] = self.util[k, :, :]
            self.dfs(k + 1, cur)


def bnb_multi_slot(demands, values, slot_count, win_lo, win_hi, horizon, tol):
    s = _SlotSearch(demands, values, slot_count, win_lo, win_hi, horizon, tol)
    s.dfs(0, 0.0)
    return (
        float(s.best),
        np.asarray(s.best_taken).astype(bool),
        np.asarray(s.best_sched).copy(),
    )
