"""Exact max-flow / min-cut on dense nonlocal graphs.

The solver core (push-relabel) is a compiled extension when available and a
pure-Python mirror otherwise; set NLCHEEGER_FORCE_PURE=1 to force the
fallback.  Networks store arcs in mutual-reverse pairs in flat arrays
sorted by tail for cache-friendly scans.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

if os.environ.get("NLCHEEGER_FORCE_PURE"):
    from . import _maxflow_ref as _core

    BACKEND = "pure"
else:
    try:
        from . import _maxflow_core as _core  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _maxflow_ref as _core

        BACKEND = "pure"

#: relative tolerance of the strong-duality certificate flow == cut
DUALITY_RTOL = 1e-9


class FlowError(ValueError):
    """Raised for malformed networks."""


class FlowNetwork:
    """Directed network with source/sink terminals and paired residual arcs.

    add_arc inserts a forward arc with a zero-capacity reverse; add_edge
    inserts an undirected edge (both directions at the given capacity,
    sharing residual bookkeeping).
    """

    def __init__(self, node_count: int, source: int, sink: int):
        if node_count < 2 or not (0 <= source < node_count) or not (0 <= sink < node_count):
            raise FlowError("invalid node_count/source/sink")
        if source == sink:
            raise FlowError("source must differ from sink")
        self.node_count = node_count
        self.source = source
        self.sink = sink
        self._tails: list[np.ndarray] = []
        self._heads: list[np.ndarray] = []
        self._caps_fwd: list[np.ndarray] = []
        self._caps_bwd: list[np.ndarray] = []

    def _add_batch(self, tails, heads, caps_fwd, caps_bwd):
        t = np.asarray(tails, dtype=np.int32).ravel()
        h = np.asarray(heads, dtype=np.int32).ravel()
        cf = np.asarray(caps_fwd, dtype=np.float64).ravel()
        cb = np.asarray(caps_bwd, dtype=np.float64).ravel()
        if not (len(t) == len(h) == len(cf) == len(cb)):
            raise FlowError("batch arrays must have equal length")
        if len(t) == 0:
            return
        if t.min() < 0 or h.min() < 0 or t.max() >= self.node_count or h.max() >= self.node_count:
            raise FlowError("arc endpoint out of range")
        if np.any(t == h):
            raise FlowError("self-loops are not allowed")
        if np.any(cf < 0) or np.any(cb < 0) or not np.all(np.isfinite(cf)) or not np.all(np.isfinite(cb)):
            raise FlowError("capacities must be finite and nonnegative")
        self._tails.append(t)
        self._heads.append(h)
        self._caps_fwd.append(cf)
        self._caps_bwd.append(cb)

    def add_arc(self, tail: int, head: int, capacity: float) -> None:
        self._add_batch([tail], [head], [capacity], [0.0])

    def add_edge(self, a: int, b: int, capacity: float) -> None:
        self._add_batch([a], [b], [capacity], [capacity])

    def add_arcs(self, tails, heads, capacities) -> None:
        caps = np.asarray(capacities, dtype=np.float64).ravel()
        self._add_batch(tails, heads, caps, np.zeros_like(caps))

    def add_edges(self, tails, heads, capacities) -> None:
        caps = np.asarray(capacities, dtype=np.float64).ravel()
        self._add_batch(tails, heads, caps, caps)

    def compile(self):
        """Freeze into flat paired-arc arrays with a CSR adjacency by tail."""
        if self._tails:
            tails = np.concatenate(self._tails)
            heads = np.concatenate(self._heads)
            cf = np.concatenate(self._caps_fwd)
            cb = np.concatenate(self._caps_bwd)
        else:
            tails = np.zeros(0, dtype=np.int32)
            heads = np.zeros(0, dtype=np.int32)
            cf = cb = np.zeros(0)
        m = len(tails)
        head = np.empty(2 * m, dtype=np.int32)
        cap = np.empty(2 * m, dtype=np.float64)
        head[0::2] = heads
        head[1::2] = tails
        cap[0::2] = cf
        cap[1::2] = cb
        arc_tail = np.empty(2 * m, dtype=np.int32)
        arc_tail[0::2] = tails
        arc_tail[1::2] = heads
        order = np.argsort(arc_tail, kind="stable").astype(np.int32)
        counts = np.bincount(arc_tail, minlength=self.node_count)
        adj_start = np.zeros(self.node_count + 1, dtype=np.int32)
        np.cumsum(counts, out=adj_start[1:])
        return head, cap, adj_start, order


@dataclass
class CutResult:
    """Maximum flow with its minimum-cut certificate.

    source_side is the minimal source side (residual-reachable from the
    source); source_side_max the maximal one (complement of the nodes that
    still reach the sink).  arc_flow[i] is the net flow on the i-th added
    arc/edge, positive in the direction it was added.
    """

    flow_value: float
    cut_value: float
    source_side: np.ndarray = field(repr=False)
    source_side_max: np.ndarray = field(repr=False)
    arc_flow: np.ndarray = field(repr=False)
    residual: np.ndarray = field(repr=False)
    head: np.ndarray = field(repr=False)
    cap: np.ndarray = field(repr=False)
    excess: np.ndarray = field(repr=False)


def _concat_ranges(starts, ends):
    """Concatenation of arange(s, e) for each (s, e) pair, vectorized."""
    counts = ends - starts
    keep = counts > 0
    starts, counts = starts[keep], counts[keep]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    pos = np.zeros(len(counts), dtype=np.int64)
    np.cumsum(counts[:-1], out=pos[1:])
    out[pos] = starts
    out[pos[1:]] -= starts[:-1] + counts[:-1] - 1
    return np.cumsum(out)


#: residuals below this fraction of the arc-pair capacity count as saturated
#: (saturated arcs can carry accumulation dust after many partial pushes)
RESIDUAL_RTOL = 1e-12


def saturation_thresholds(cap: np.ndarray) -> np.ndarray:
    pair_cap = cap.copy()
    pair_cap[0::2] += cap[1::2]
    pair_cap[1::2] += cap[0::2]
    return RESIDUAL_RTOL * pair_cap


def _reachable(n, adj_start, adj_arc, head, res, start, forward=True, thresh=None):
    """Residual reachability by frontier BFS; forward=False follows reverse arcs."""
    seen = np.zeros(n, dtype=bool)
    seen[start] = True
    frontier = np.array([start], dtype=np.int64)
    while frontier.size:
        idx = _concat_ranges(adj_start[frontier].astype(np.int64), adj_start[frontier + 1].astype(np.int64))
        arcs = adj_arc[idx]
        use = arcs if forward else arcs ^ 1
        open_arc = res[use] > 0.0 if thresh is None else res[use] > thresh[use]
        targets = head[arcs[open_arc]]
        targets = targets[~seen[targets]]
        frontier = np.unique(targets)
        seen[frontier] = True
    return seen


def dump_dimacs(net: FlowNetwork, path: str) -> None:
    """Debug dump in DIMACS max-flow style (capacities kept as reals)."""
    head, cap, adj_start, adj_arc = net.compile()
    tails = head[1::2]
    with open(path, "w") as fh:
        fh.write(f"p max {net.node_count} {len(tails)}\n")
        fh.write(f"n {net.source + 1} s\n")
        fh.write(f"n {net.sink + 1} t\n")
        for k in range(len(tails)):
            fh.write(f"a {tails[k] + 1} {head[2 * k] + 1} {cap[2 * k]!r}\n")
            if cap[2 * k + 1] > 0.0:
                fh.write(f"a {head[2 * k] + 1} {tails[k] + 1} {cap[2 * k + 1]!r}\n")


def solve_maxflow(net: FlowNetwork) -> CutResult:
    """Exact max flow via push-relabel; verifies flow == cut on return."""
    head, cap, adj_start, adj_arc = net.compile()
    n = net.node_count
    res = cap.copy()
    flow_value = _core.solve(n, net.source, net.sink, head, adj_start, adj_arc, res)

    flow = cap - res  # antisymmetric across each arc pair
    thr = saturation_thresholds(cap)
    src_min = _reachable(n, adj_start, adj_arc, head, res, net.source, forward=True, thresh=thr)
    reach_t = _reachable(n, adj_start, adj_arc, head, res, net.sink, forward=False, thresh=thr)
    src_max = ~reach_t

    # cut capacity across the minimal source side
    tails = head[1::2]
    cross = src_min[tails] & ~src_min[head[0::2]]
    cut_fwd = float(cap[0::2][cross].sum())
    cross_b = src_min[head[0::2]] & ~src_min[tails]
    cut_bwd = float(cap[1::2][cross_b].sum())
    cut_value = cut_fwd + cut_bwd

    scale = max(abs(flow_value), abs(cut_value), 1e-300)
    if abs(flow_value - cut_value) > DUALITY_RTOL * scale:
        raise FlowError(
            f"strong duality violated: flow={flow_value!r} cut={cut_value!r}"
        )

    # conservation bookkeeping: net outflow per node
    excess = np.zeros(n)
    np.add.at(excess, head[0::2], flow[0::2])
    np.add.at(excess, tails, -flow[0::2])

    return CutResult(
        flow_value=flow_value,
        cut_value=cut_value,
        source_side=src_min,
        source_side_max=src_max,
        arc_flow=flow[0::2].copy(),
        residual=res,
        head=head,
        cap=cap,
        excess=excess,
    )
