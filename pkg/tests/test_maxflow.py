import itertools

import numpy as np
import pytest

from nlcheeger import _maxflow_ref
from nlcheeger.maxflow import BACKEND, FlowError, FlowNetwork, solve_maxflow

try:
    from nlcheeger import _maxflow_core

    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False


def brute_mincut(n, s, t, arcs):
    best = np.inf
    middle = [v for v in range(n) if v not in (s, t)]
    for bits in itertools.product([0, 1], repeat=len(middle)):
        side = {s}
        for v, b in zip(middle, bits):
            if b:
                side.add(v)
        c = sum(cap for (u, v, cap) in arcs if u in side and v not in side)
        best = min(best, c)
    return best


def test_single_arc():
    net = FlowNetwork(2, 0, 1)
    net.add_arc(0, 1, 3.5)
    r = solve_maxflow(net)
    assert r.flow_value == 3.5
    assert r.cut_value == 3.5


def test_diamond_undirected():
    net = FlowNetwork(4, 0, 3)
    net.add_edge(0, 1, 1.0)
    net.add_edge(0, 2, 2.0)
    net.add_edge(1, 3, 2.0)
    net.add_edge(2, 3, 1.0)
    net.add_edge(1, 2, 1.0)
    r = solve_maxflow(net)
    assert r.flow_value == pytest.approx(3.0, abs=1e-12)


def test_disconnected():
    net = FlowNetwork(3, 0, 2)
    net.add_arc(0, 1, 1.0)
    r = solve_maxflow(net)
    assert r.flow_value == 0.0
    assert r.source_side[0] and not r.source_side[2]


def test_random_networks_match_exhaustive_cuts():
    rng = np.random.default_rng(0)
    for trial in range(120):
        n = 8
        arcs = []
        net = FlowNetwork(n, 0, n - 1)
        for u in range(n):
            for v in range(n):
                if u != v and rng.random() < 0.4:
                    c = float(np.round(rng.random() * 10, 3))
                    arcs.append((u, v, c))
                    net.add_arc(u, v, c)
        r = solve_maxflow(net)
        bf = brute_mincut(n, 0, n - 1, arcs)
        assert r.flow_value == pytest.approx(bf, rel=1e-12, abs=1e-12)
        # conservation at non-terminals
        balance = r.excess.copy()
        balance[0] += r.flow_value
        balance[n - 1] -= r.flow_value
        assert np.abs(balance).max() < 1e-9
        # strong duality certificate
        assert abs(r.flow_value - r.cut_value) <= 1e-9 * max(1.0, r.cut_value)
        # cut sides nest
        assert np.all(r.source_side <= r.source_side_max)


def test_capacity_monotonicity():
    rng = np.random.default_rng(4)
    for trial in range(30):
        n = 7
        entries = [
            (u, v, float(np.round(rng.random() * 5, 3)))
            for u in range(n)
            for v in range(n)
            if u != v and rng.random() < 0.4
        ]
        if not entries:
            continue

        def flow_of(es):
            net = FlowNetwork(n, 0, n - 1)
            for u, v, c in es:
                net.add_arc(u, v, c)
            return solve_maxflow(net).flow_value

        base = flow_of(entries)
        k = int(rng.integers(0, len(entries)))
        bumped = list(entries)
        u, v, c = bumped[k]
        bumped[k] = (u, v, c + 1.0)
        assert flow_of(bumped) >= base - 1e-12


def test_determinism():
    rng = np.random.default_rng(8)
    net_args = []
    for u in range(9):
        for v in range(u + 1, 9):
            if rng.random() < 0.5:
                net_args.append((u, v, float(rng.random() * 4)))

    def run():
        net = FlowNetwork(9, 0, 8)
        for u, v, c in net_args:
            net.add_edge(u, v, c)
        r = solve_maxflow(net)
        return r.flow_value, r.arc_flow.tobytes(), r.source_side.tobytes()

    assert run() == run()


@pytest.mark.skipif(not HAVE_COMPILED, reason="compiled core not built")
def test_backends_bitwise_identical():
    rng = np.random.default_rng(42)
    for trial in range(30):
        n = 9
        net = FlowNetwork(n, 0, n - 1)
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < 0.5:
                    net.add_edge(u, v, float(rng.random() * 4))
        head, cap, adj_start, adj_arc = net.compile()
        res1, res2 = cap.copy(), cap.copy()
        f1 = _maxflow_core.solve(n, 0, n - 1, head, adj_start, adj_arc, res1)
        f2 = _maxflow_ref.solve(n, 0, n - 1, head, adj_start, adj_arc, res2)
        assert f1 == f2
        assert np.array_equal(res1, res2)


def test_backend_reported():
    assert BACKEND in ("compiled", "pure")


def test_network_validation():
    with pytest.raises(FlowError):
        FlowNetwork(2, 0, 0)
    net = FlowNetwork(3, 0, 2)
    with pytest.raises(FlowError):
        net.add_arc(0, 3, 1.0)
    with pytest.raises(FlowError):
        net.add_arc(1, 1, 1.0)
    with pytest.raises(FlowError):
        net.add_arc(0, 1, -2.0)
