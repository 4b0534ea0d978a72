#!/usr/bin/env python3
"""Benchmark the push-relabel backends on Cheeger-style cut instances.

Builds the Dinkelbach subproblem network for the unit square at several
resolutions and times one max-flow solve per backend.  The compiled core
and the pure-Python mirror produce bitwise-identical residuals, so the
comparison is purely about speed.

Usage: python benchmarks/bench_maxflow.py [--sizes 8,12,16] [--out bench.csv]
"""

import argparse
import csv
import sys
import time

import numpy as np

from nlcheeger import _maxflow_ref
from nlcheeger.geometry import GridDomain, GridSpec
from nlcheeger.kernel import KernelParams, build_table
from nlcheeger.functional import bind
from nlcheeger.cheeger import _CutProblem, _pair_arrays

try:
    from nlcheeger import _maxflow_core

    BACKENDS = [("compiled", _maxflow_core), ("pure", _maxflow_ref)]
except ImportError:
    BACKENDS = [("pure", _maxflow_ref)]


def build_instance(n: int):
    grid = GridSpec(2, (n, n), 1.0 / n, (0.0, 0.0))
    dom = GridDomain(grid, np.ones((n, n), dtype=bool))
    radius = min(16.0 / n, 1.2)
    tab = build_table(KernelParams(2, 0.5, 1.0, truncation_radius=max(radius, 3.5 / n)), grid)
    bound = bind(tab, grid)
    mask = dom.mask
    ext = bound.cell_complement_unit(mask).reshape(-1)[np.flatnonzero(mask.reshape(-1))]
    pa, pb, pw = _pair_arrays(bound, mask)
    prob = _CutProblem(mask, pw, pa, pb, ext)
    lam = bound.perimeter_unit(mask) / prob.n_cells
    return prob, lam


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="8,12,16,24")
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    sizes = [int(v) for v in args.sizes.split(",")]

    rows = []
    print(f"{'size':>6} {'nodes':>8} {'arcs':>10} " + " ".join(f"{n:>12}" for n, _ in BACKENDS))
    for n in sizes:
        prob, lam = build_instance(n)
        n_arcs = len(prob.head)
        times = []
        flows = []
        for name, core in BACKENDS:
            cap = prob.cap.copy()
            cap[prob.sink_arc_even] = lam * 0.98
            res = cap.copy()
            t0 = time.time()
            fv = core.solve(
                prob.n_nodes, prob.source, prob.sink, prob.head, prob.adj_start, prob.adj_arc, res
            )
            times.append(time.time() - t0)
            flows.append(fv)
        if len(flows) == 2 and abs(flows[0] - flows[1]) > 1e-9 * max(flows[0], 1.0):
            print("backend disagreement!", flows)
            return 1
        print(
            f"{n:>6} {prob.n_nodes:>8} {n_arcs:>10} "
            + " ".join(f"{t:>11.3f}s" for t in times)
        )
        rows.append([n, prob.n_nodes, n_arcs] + times)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["size", "nodes", "arcs"] + [name for name, _ in BACKENDS])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
