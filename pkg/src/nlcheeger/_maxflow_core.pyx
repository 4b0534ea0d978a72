# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Highest-label push-relabel max flow with gap heuristic, real capacities.

Phase 1 computes a maximum preflow (flow value at the sink); phase 2
returns leftover excess to the source, so the final state is a feasible
maximum flow with exact conservation at every non-terminal node.

Arcs come in pairs (a and a^1 are mutual reverses): pushing on a increases
the residual of a^1.  Push-relabel complexity bounds are capacity
independent, so real-valued capacities need no scaling; exactness is
certified downstream by the flow = cut check.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def solve(int n, int source, int sink,
          cnp.int32_t[::1] head, cnp.int32_t[::1] adj_start,
          cnp.int32_t[::1] adj_arc, cnp.float64_t[::1] res):
    """Run push-relabel in place on the residual array; returns flow value."""
    cdef cnp.ndarray[cnp.int32_t, ndim=1] height_arr = np.zeros(n, dtype=np.int32)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] excess_arr = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cur_arr = np.empty(n, dtype=np.int32)
    cdef int nbuckets = 2 * n + 3
    cdef cnp.ndarray[cnp.int32_t, ndim=1] bucket_arr = np.full(nbuckets, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] nxt_arr = np.full(n, -1, dtype=np.int32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] inq_arr = np.zeros(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] hcount_arr = np.zeros(nbuckets, dtype=np.int32)

    cdef cnp.int32_t[::1] height = height_arr
    cdef cnp.float64_t[::1] excess = excess_arr
    cdef cnp.int32_t[::1] cur = cur_arr
    cdef cnp.int32_t[::1] bucket = bucket_arr
    cdef cnp.int32_t[::1] nxt = nxt_arr
    cdef cnp.uint8_t[::1] inq = inq_arr
    cdef cnp.int32_t[::1] hcount = hcount_arr

    cdef int v, w, a, k, hw, new_h, hi, old_h, limit, phase
    cdef double send

    for v in range(n):
        cur[v] = adj_start[v]
    height[source] = n
    for v in range(n):
        hcount[height[v]] += 1

    for k in range(adj_start[source], adj_start[source + 1]):
        a = adj_arc[k]
        send = res[a]
        if send > 0.0:
            w = head[a]
            res[a] = 0.0
            res[a ^ 1] += send
            excess[w] += send

    for phase in range(2):
        limit = n if phase == 0 else 2 * n + 1
        hi = 0
        for v in range(n):
            inq[v] = 0
        for v in range(nbuckets):
            bucket[v] = -1
        for v in range(n):
            if v != source and v != sink and excess[v] > 0.0 and height[v] < limit:
                inq[v] = 1
                nxt[v] = bucket[height[v]]
                bucket[height[v]] = v
                if height[v] > hi:
                    hi = height[v]
        while hi >= 0:
            v = bucket[hi]
            if v == -1:
                hi -= 1
                continue
            bucket[hi] = nxt[v]
            inq[v] = 0
            if excess[v] <= 0.0:
                continue
            if height[v] != hi:
                if height[v] < limit:
                    inq[v] = 1
                    nxt[v] = bucket[height[v]]
                    bucket[height[v]] = v
                    if height[v] > hi:
                        hi = height[v]
                continue
            while excess[v] > 0.0:
                if cur[v] == adj_start[v + 1]:
                    old_h = height[v]
                    new_h = 2 * n + 1
                    for k in range(adj_start[v], adj_start[v + 1]):
                        a = adj_arc[k]
                        if res[a] > 0.0:
                            hw = height[head[a]]
                            if hw + 1 < new_h:
                                new_h = hw + 1
                    hcount[old_h] -= 1
                    if phase == 0 and hcount[old_h] == 0 and 0 < old_h < n:
                        # gap heuristic: levels above a dead one cannot
                        # reach the sink in this phase
                        for w in range(n):
                            if w != source and old_h < height[w] < n:
                                hcount[height[w]] -= 1
                                height[w] = n + 1
                                hcount[n + 1] += 1
                    if new_h <= old_h:
                        new_h = old_h + 1
                    height[v] = new_h
                    hcount[new_h] += 1
                    cur[v] = adj_start[v]
                    if new_h >= limit:
                        break
                    continue
                a = adj_arc[cur[v]]
                w = head[a]
                if res[a] > 0.0 and height[v] == height[w] + 1:
                    send = excess[v]
                    if res[a] < send:
                        send = res[a]
                    res[a] -= send
                    res[a ^ 1] += send
                    excess[v] -= send
                    excess[w] += send
                    if w != source and w != sink and height[w] < limit and not inq[w]:
                        inq[w] = 1
                        nxt[w] = bucket[height[w]]
                        bucket[height[w]] = w
                        if height[w] > hi:
                            hi = height[w]
                else:
                    cur[v] += 1
            if excess[v] > 0.0 and height[v] < limit and v != source and v != sink:
                inq[v] = 1
                nxt[v] = bucket[height[v]]
                bucket[height[v]] = v
                if height[v] > hi:
                    hi = height[v]
        for v in range(n):
            cur[v] = adj_start[v]

    return float(excess[sink])
