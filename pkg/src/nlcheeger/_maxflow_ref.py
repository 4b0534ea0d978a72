"""Pure-Python push-relabel backend, mirroring _maxflow_core step for step.

Selected at import time when the compiled extension is unavailable.  Slow on
large dense networks but bitwise-identical in its results, which the backend
agreement tests rely on.
"""

import numpy as np


def solve(n, source, sink, head, adj_start, adj_arc, res):
    """Run push-relabel in place on the residual array; returns flow value."""
    height = np.zeros(n, dtype=np.int32)
    excess = np.zeros(n, dtype=np.float64)
    cur = adj_start[:n].astype(np.int32).copy()
    nbuckets = 2 * n + 3
    bucket = np.full(nbuckets, -1, dtype=np.int32)
    nxt = np.full(n, -1, dtype=np.int32)
    inq = np.zeros(n, dtype=bool)
    hcount = np.zeros(nbuckets, dtype=np.int32)

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
        inq[:] = False
        bucket[:] = -1
        for v in range(n):
            if v != source and v != sink and excess[v] > 0.0 and height[v] < limit:
                inq[v] = True
                nxt[v] = bucket[height[v]]
                bucket[height[v]] = v
                if height[v] > hi:
                    hi = int(height[v])
        while hi >= 0:
            v = bucket[hi]
            if v == -1:
                hi -= 1
                continue
            bucket[hi] = nxt[v]
            inq[v] = False
            if excess[v] <= 0.0:
                continue
            if height[v] != hi:
                if height[v] < limit:
                    inq[v] = True
                    nxt[v] = bucket[height[v]]
                    bucket[height[v]] = v
                    if height[v] > hi:
                        hi = int(height[v])
                continue
            while excess[v] > 0.0:
                if cur[v] == adj_start[v + 1]:
                    old_h = int(height[v])
                    new_h = 2 * n + 1
                    for k in range(adj_start[v], adj_start[v + 1]):
                        a = adj_arc[k]
                        if res[a] > 0.0:
                            hw = int(height[head[a]])
                            if hw + 1 < new_h:
                                new_h = hw + 1
                    hcount[old_h] -= 1
                    if phase == 0 and hcount[old_h] == 0 and 0 < old_h < n:
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
                    send = min(excess[v], res[a])
                    res[a] -= send
                    res[a ^ 1] += send
                    excess[v] -= send
                    excess[w] += send
                    if w != source and w != sink and height[w] < limit and not inq[w]:
                        inq[w] = True
                        nxt[w] = bucket[height[w]]
                        bucket[height[w]] = w
                        if height[w] > hi:
                            hi = int(height[w])
                else:
                    cur[v] += 1
            if excess[v] > 0.0 and height[v] < limit and v != source and v != sink:
                inq[v] = True
                nxt[v] = bucket[height[v]]
                bucket[height[v]] = v
                if height[v] > hi:
                    hi = int(height[v])
        cur = adj_start[:n].astype(np.int32).copy()

    return float(excess[sink])
