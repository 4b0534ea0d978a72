import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlcheeger.geometry import GridSpec
from nlcheeger.kernel import (
    COMPLEMENT,
    KernelError,
    KernelParams,
    KernelTable,
    TableOnGrid,
    build_table,
    cell_pair_weight,
    integral_diverges,
    interaction,
    unit_weight,
)


def analytic_1d(delta: int, alpha: float) -> float:
    """Independent closed form: second difference of t^(2-alpha)."""
    c = (1.0 - alpha) * (2.0 - alpha)
    f = lambda t: t ** (2.0 - alpha) if t > 0 else 0.0
    return (f(delta + 1) - 2.0 * f(delta) + f(delta - 1)) / c


def test_1d_spec_value():
    # unit cells [0,1] and [2,3] at alpha = 1.5
    params = KernelParams(1, 0.5, 1.0, truncation_radius=10.0)
    w = cell_pair_weight(params, [2], 1.0)
    assert w == pytest.approx(0.3855052687, abs=1e-9)


def test_1d_matches_analytic_all_offsets():
    for alpha in (1.25, 1.5, 1.75):
        for d in range(1, 40):
            assert unit_weight([d], 1, alpha) == pytest.approx(analytic_1d(d, alpha), rel=1e-12)


def test_2d_against_quadrature_oracle():
    scipy_integrate = pytest.importorskip("scipy.integrate")

    def oracle(d1, d2, alpha):
        f = lambda z2, z1: (z1 * z1 + z2 * z2) ** (-alpha / 2) * (1 - abs(z1 - d1)) * (
            1 - abs(z2 - d2)
        )
        val, _ = scipy_integrate.dblquad(
            f, d1 - 1, d1 + 1, lambda z1: d2 - 1, lambda z1: d2 + 1, epsabs=1e-12, epsrel=1e-12
        )
        return val

    for d1, d2, alpha in [(1, 0, 2.5), (1, 1, 2.5), (3, 2, 2.7), (1, 1, 3.0), (6, 0, 2.2)]:
        mine = unit_weight([d1, d2], 2, alpha)
        assert mine == pytest.approx(oracle(d1, d2, alpha), rel=1e-8)


@settings(max_examples=60, deadline=None)
@given(
    d1=st.integers(min_value=-6, max_value=6),
    d2=st.integers(min_value=-6, max_value=6),
)
def test_weight_symmetry(d1, d2):
    if d1 == 0 and d2 == 0:
        return
    alpha = 2.5
    w = unit_weight([d1, d2], 2, alpha)
    assert w == pytest.approx(unit_weight([-d1, -d2], 2, alpha), rel=1e-12)
    assert w == pytest.approx(unit_weight([d2, d1], 2, alpha), rel=1e-12)
    assert w == pytest.approx(unit_weight([-d1, d2], 2, alpha), rel=1e-12)


def test_spacing_scaling_exact():
    params = KernelParams(1, 0.5, 1.0, truncation_radius=10.0)
    w1 = cell_pair_weight(params, [3], 1.0)
    w2 = cell_pair_weight(params, [3], 2.0)
    assert w2 == pytest.approx(2.0 ** (2 - params.alpha) * w1, rel=1e-14)
    params2 = KernelParams(2, 0.5, 1.0, truncation_radius=10.0)
    w1 = cell_pair_weight(params2, [2, 1], 0.5)
    w2 = cell_pair_weight(params2, [2, 1], 1.5)
    assert w2 == pytest.approx(3.0 ** (4 - params2.alpha) * w1, rel=1e-13)


def test_offset_zero_rejected():
    params = KernelParams(1, 0.5, 1.0, truncation_radius=10.0)
    with pytest.raises(KernelError):
        cell_pair_weight(params, [0], 1.0)


def test_divergence_rule():
    assert integral_diverges([1], 1, 2.0)
    assert not integral_diverges([1], 1, 1.99)
    assert not integral_diverges([2], 1, 2.5)
    assert integral_diverges([1, 0], 2, 3.0)
    assert not integral_diverges([1, 1], 2, 3.5)
    assert integral_diverges([1, 1], 2, 4.0)
    with pytest.raises(KernelError):
        unit_weight([1, 0], 2, 3.2)


def test_substitution_flags():
    grid = GridSpec(1, (4,), 1.0, (0.0,))
    tab = build_table(KernelParams(1, 0.5, 2.0, truncation_radius=5.0), grid)  # alpha = 2
    assert tab.substituted.any()
    subbed = tab.offsets[tab.substituted]
    assert set(np.abs(subbed).ravel()) == {1}


def test_table_monotone_beyond_near_field():
    grid = GridSpec(2, (4, 4), 1.0, (0.0, 0.0))
    tab = build_table(KernelParams(2, 0.5, 1.0, truncation_radius=12.0), grid)
    for ray in ((1, 0), (1, 1), (2, 1)):
        vals = [tab.weight(np.array(ray) * k) for k in range(1, 5)]
        assert all(a > b > 0 for a, b in zip(vals[:-1], vals[1:]))


def test_refinement_convergence_2d():
    grid = GridSpec(2, (4, 4), 1.0, (0.0, 0.0))
    tabs = [
        build_table(KernelParams(2, 0.5, 1.0, truncation_radius=6.0, near_field_levels=lv), grid)
        for lv in (2, 4)
    ]
    near = np.abs(tabs[0].offsets).max(axis=1) <= 2
    rel = np.abs(tabs[1].weights_unit[near] - tabs[0].weights_unit[near]) / tabs[0].weights_unit[near]
    assert rel.max() < 1e-7


def test_tail_matches_radial_formula_and_oracle(unit_cell, table_unit_cell_s05):
    tab = table_unit_cell_s05
    # spec's radial tail estimate: N omega_N (alpha-N)^-1 R^(N-alpha) h^N
    radial = tab.radial_tail_estimate()
    assert radial == pytest.approx(1 * 2 * 60.0**-0.5 / 0.5, rel=1e-12)
    # the operative tail integrates beyond the outer cell edge (R + h/2),
    # so it sits half a cell beyond the nominal-radius estimate
    assert tab.tail_coefficient == pytest.approx(radial, rel=1e-2)
    shifted = 1 * 2 * 60.5**-0.5 / 0.5
    assert tab.tail_coefficient == pytest.approx(shifted, rel=1e-4)


def test_tail_validity_doubling(unit_cell):
    grid = unit_cell.grid
    vals = []
    for r in (25.0, 50.0):
        tab = build_table(KernelParams(1, 0.5, 1.0, truncation_radius=r), grid)
        bound = TableOnGrid(tab, grid)
        vals.append(bound.interaction_unit(np.ones(1, dtype=bool), COMPLEMENT) * tab.scale)
    assert abs(vals[1] - vals[0]) / vals[0] < 1e-5
    grid2 = GridSpec(2, (1, 1), 1.0, (0.0, 0.0))
    vals = []
    for r in (10.0, 20.0):
        tab = build_table(KernelParams(2, 0.5, 1.0, truncation_radius=r), grid2)
        bound = TableOnGrid(tab, grid2)
        vals.append(bound.interaction_unit(np.ones((1, 1), dtype=bool), COMPLEMENT) * tab.scale)
    assert abs(vals[1] - vals[0]) / vals[0] < 1e-5


def test_unit_cell_complement_is_half_perimeter(unit_cell, table_unit_cell_s05):
    val = interaction(table_unit_cell_s05, unit_cell.grid, np.ones(1, dtype=bool), COMPLEMENT)
    assert val == pytest.approx(8.0, rel=1e-12)  # P_s(cell)/2 at s = 0.5, unit cell


def test_interaction_symmetry_additivity(square8, table_square8_s05):
    rng = np.random.default_rng(3)
    grid = square8.grid
    tab = table_square8_s05
    for _ in range(10):
        labels = rng.integers(0, 3, size=(8, 8))
        a, b, c = labels == 0, labels == 1, labels == 2
        if not (a.any() and b.any() and c.any()):
            continue
        lab = interaction(tab, grid, a, b)
        lba = interaction(tab, grid, b, a)
        assert lab == pytest.approx(lba, rel=1e-12)
        labc = interaction(tab, grid, a, b | c)
        assert labc == pytest.approx(lab + interaction(tab, grid, a, c), rel=1e-12)
    with pytest.raises(KernelError):
        interaction(tab, grid, a, a)


def test_table_cache_bit_identical(tmp_path):
    grid = GridSpec(2, (4, 4), 0.25, (0.0, 0.0))
    params = KernelParams(2, 0.37, 1.0, truncation_radius=3.0)
    t1 = build_table(params, grid, cache_dir=str(tmp_path))
    t2 = build_table(params, grid, cache_dir=str(tmp_path))  # from cache
    t3 = build_table(params, grid)  # fresh rebuild
    for a, b in ((t1, t2), (t1, t3)):
        assert np.array_equal(a.offsets, b.offsets)
        assert a.weights_unit.tobytes() == b.weights_unit.tobytes()
        assert a.tail_unit == b.tail_unit


def test_truncation_too_small_rejected():
    grid = GridSpec(1, (4,), 1.0, (0.0,))
    with pytest.raises(KernelError):
        build_table(KernelParams(1, 0.5, 1.0, truncation_radius=2.0), grid)


def test_params_validation():
    with pytest.raises(KernelError):
        KernelParams(1, 1.2, 1.0, truncation_radius=5.0)
    with pytest.raises(KernelError):
        KernelParams(1, 0.5, 0.5, truncation_radius=5.0)
