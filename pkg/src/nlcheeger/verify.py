"""Property-suite runner: inequality and identity checks with margins.

Each check returns (name, passed, margin, details); the CLI prints one line
per check and fails the run when any margin is violated.  Margins follow
the convention slack = 1e-12 absolute plus 1e-6 relative unless a check
states otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .geometry import GridDomain, GridSpec, poincare_constant
from .kernel import COMPLEMENT, KernelParams, build_table, covering_params, unit_weight
from .functional import (
    ScalarField,
    bind,
    coarea_check,
    interpolation_bound,
    isoperimetric_deficit,
    isoperimetric_reference,
    nikolskii_bound,
    nikolskii_ratio,
    pointwise_ineq_C1,
    pointwise_ineq_C2,
    seminorm,
)
from .cheeger import brute_force_cheeger, solve_cheeger
from .eigen import solve_eigen

ABS_SLACK = 1e-12
REL_SLACK = 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float  # smallest observed slack; negative = violation
    details: dict = dc_field(default_factory=dict)


def _interval_domain(n=8, spacing=0.125):
    grid = GridSpec(1, (n,), spacing, (0.0,))
    return GridDomain(grid, np.ones(n, dtype=bool))


def suite_pointwise(trials: int = 100_000, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 10.0, trials)
    b = rng.uniform(0.0, 10.0, trials)
    m = rng.uniform(0.0, 10.0, trials)
    p = rng.uniform(1.0 + 1e-6, 6.0, trials)
    beta = rng.uniform(1.0, 8.0, trials)
    out = []
    for name, fn in (("pointwise-power", None), ("pointwise-truncated", None)):
        worst = math.inf
        for k in range(trials):
            if name == "pointwise-power":
                lhs, rhs = pointwise_ineq_C1(a[k], b[k], float(p[k]), float(beta[k]))
            else:
                lhs, rhs = pointwise_ineq_C2(a[k], b[k], m[k], float(p[k]), float(beta[k]))
            worst = min(worst, float(lhs - rhs) + ABS_SLACK * max(1.0, float(lhs)))
        out.append(CheckResult(name, worst >= 0.0, worst, {"trials": trials}))
    return out


def suite_pointwise_fast(trials: int = 100_000, seed: int = 0) -> list[CheckResult]:
    """Vectorized variant used by the acceptance gate."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 10.0, trials)
    b = rng.uniform(0.0, 10.0, trials)
    m = rng.uniform(0.0, 10.0, trials)
    out = []
    worst_all = math.inf
    for p, beta in ((1.3, 1.0), (2.0, 3.0), (3.5, 2.0), (5.0, 6.0)):
        lhs, rhs = pointwise_ineq_C1(a, b, p, beta)
        worst = float((lhs - rhs + ABS_SLACK * np.maximum(1.0, lhs)).min())
        worst_all = min(worst_all, worst)
    out.append(CheckResult("pointwise-power", worst_all >= 0.0, worst_all, {"trials": 4 * trials}))
    worst_all = math.inf
    for p, beta in ((1.3, 1.0), (2.0, 3.0), (3.5, 2.0), (5.0, 6.0)):
        lhs, rhs = pointwise_ineq_C2(a, b, m, p, beta)
        worst = float((lhs - rhs + ABS_SLACK * np.maximum(1.0, lhs)).min())
        worst_all = min(worst_all, worst)
    out.append(
        CheckResult("pointwise-truncated", worst_all >= 0.0, worst_all, {"trials": 4 * trials})
    )
    return out


def suite_coarea(trials: int = 1000, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    dom1 = _interval_domain(10, 0.1)
    tab1 = build_table(covering_params(dom1.grid, 0.5, 1.0), dom1.grid)
    grid2 = GridSpec(2, (5, 5), 0.2, (0.0, 0.0))
    dom2 = GridDomain(grid2, np.ones((5, 5), dtype=bool))
    tab2 = build_table(covering_params(grid2, 0.6, 1.0), grid2)
    worst = math.inf
    for k in range(trials):
        if k % 2 == 0:
            dom, tab = dom1, tab1
        else:
            dom, tab = dom2, tab2
        levels = rng.choice([0.0, 0.25, 0.8, 1.0, 2.5], size=dom.grid.shape)
        levels[~dom.mask] = 0.0
        lhs, rhs, gap = coarea_check(ScalarField(dom, levels), tab)
        rel = abs(gap) / max(lhs, 1e-300)
        worst = min(worst, 1e-10 - rel)
    return [CheckResult("coarea-identity", worst >= 0.0, worst, {"trials": trials})]


def suite_interpolation(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    worst_sharp = math.inf
    for s in (0.25, 0.5, 0.75):
        dom = _interval_domain(12, 0.25)
        tab = build_table(covering_params(dom.grid, s, 1.0), dom.grid)
        _, _, ratio = interpolation_bound(dom.mask, dom.grid, tab)
        worst_sharp = min(worst_sharp, 1e-3 - abs(ratio - 1.0))
    out.append(CheckResult("interpolation-1d-sharp", worst_sharp >= 0.0, worst_sharp, {}))
    worst = math.inf
    grid2 = GridSpec(2, (8, 8), 0.125, (0.0, 0.0))
    tab2 = build_table(covering_params(grid2, 0.5, 1.0), grid2)
    grid1 = GridSpec(1, (12,), 0.25, (0.0,))
    tab1 = build_table(covering_params(grid1, 0.5, 1.0), grid1)
    for k in range(200):
        if k % 2 == 0:
            mask = rng.random((8, 8)) < 0.5
            if not mask.any():
                continue
            _, _, ratio = interpolation_bound(mask, grid2, tab2)
        else:
            mask = rng.random(12) < 0.5
            if not mask.any():
                continue
            _, _, ratio = interpolation_bound(mask, grid1, tab1)
        worst = min(worst, 1.0 + REL_SLACK - ratio)
    out.append(CheckResult("interpolation-upper", worst >= 0.0, worst, {"trials": 200}))
    return out


def suite_isoperimetric(trials: int = 1000, seed: int = 0, n: int = 32) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    grid = GridSpec(2, (n, n), 1.0 / n, (0.0, 0.0))
    tab = build_table(KernelParams(2, 0.5, 1.0, truncation_radius=1.5), grid)
    ref = isoperimetric_reference(2, 0.5)
    tol = 2.0 * grid.spacing ** (1.0 - 0.5)  # spacing-scaled reference slack
    worst = math.inf
    for _ in range(trials):
        mask = rng.random((n, n)) < rng.uniform(0.2, 0.8)
        if not mask.any():
            continue
        d = isoperimetric_deficit(mask, grid, tab, ref)
        worst = min(worst, d + tol)
    return [CheckResult("isoperimetric-deficit", worst >= 0.0, worst, {"trials": trials, "tol": tol})]


def suite_kernel(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    # symmetry under sign flips
    worst = math.inf
    for _ in range(50):
        d = rng.integers(1, 9, size=2)
        w1 = unit_weight(d, 2, 2.5)
        w2 = unit_weight(-d, 2, 2.5)
        w3 = unit_weight([d[0], -d[1]], 2, 2.5)
        worst = min(worst, REL_SLACK - abs(w1 - w2) / w1, REL_SLACK - abs(w1 - w3) / w1)
    out.append(CheckResult("kernel-symmetry", worst >= 0.0, worst, {}))
    # radial monotonicity along rays (alphas below the face-divergence bound)
    worst = math.inf
    for alpha in (2.2, 2.5, 2.9):
        for ray in ((1, 0), (1, 1), (2, 1)):
            vals = [unit_weight((k * ray[0], k * ray[1]), 2, alpha) for k in range(1, 7)]
            worst = min(worst, min(v0 - v1 for v0, v1 in zip(vals[:-1], vals[1:])))
    out.append(CheckResult("kernel-monotone", worst > 0.0, worst, {}))
    # tail stability under doubling the truncation radius
    grid = GridSpec(2, (1, 1), 1.0, (0.0, 0.0))
    worst = math.inf
    for s in (0.3, 0.8):
        vals = []
        for r in (10.0, 20.0):
            tab = build_table(KernelParams(2, s, 1.0, truncation_radius=r), grid)
            vals.append(bind(tab, grid).interaction_unit(np.ones((1, 1), bool), COMPLEMENT) * tab.scale)
        worst = min(worst, 1e-5 - abs(vals[1] - vals[0]) / vals[0])
    out.append(CheckResult("kernel-tail-stability", worst >= 0.0, worst, {}))
    return out


def suite_cheeger(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    worst_h = math.inf
    worst_set = True
    worst_dual = math.inf
    worst_contact = True
    n_checked = 0
    for trial in range(12):
        if trial % 2 == 0:
            n = int(rng.integers(3, 13))
            grid = GridSpec(1, (n,), 0.5, (0.0,))
            mask = rng.random(n) < 0.8
        else:
            sh = (int(rng.integers(2, 5)), int(rng.integers(2, 5)))
            grid = GridSpec(2, sh, 0.5, (0.0, 0.0))
            mask = rng.random(sh) < 0.8
        if not mask.any() or mask.sum() > 14:
            continue
        dom = GridDomain(grid, mask)
        s = float(rng.choice([0.3, 0.5, 0.8]))
        tab = build_table(covering_params(grid, s, 1.0), grid)
        res = solve_cheeger(dom, tab)
        hb, mb, _ = brute_force_cheeger(dom, tab)
        worst_h = min(worst_h, 1e-10 - abs(res.h - hb) / hb)
        worst_set = worst_set and bool(np.array_equal(res.optimal_set.member, mb))
        worst_dual = min(
            worst_dual,
            1e-8 - abs(res.dual_sup_norm * res.h - 1.0),
            1e-9 - res.flow_gap,
        )
        # boundary contact: some optimal cell next to a non-domain face
        member = res.optimal_set.member
        contact = _touches_boundary(member, mask)
        worst_contact = worst_contact and contact
        n_checked += 1
    out.append(CheckResult("cheeger-brute-force", worst_h >= 0.0 and worst_set, worst_h, {"instances": n_checked}))
    out.append(CheckResult("cheeger-duality", worst_dual >= 0.0, worst_dual, {}))
    out.append(CheckResult("cheeger-boundary-contact", worst_contact, 0.0 if worst_contact else -1.0, {}))
    return out


def _touches_boundary(member: np.ndarray, mask: np.ndarray) -> bool:
    """True when some member cell has a face toward the domain complement."""
    m = member
    dim = m.ndim
    for axis in range(dim):
        lead = [slice(None)] * dim
        lead[axis] = 0
        if (m[tuple(lead)]).any():
            return True
        lead[axis] = -1
        if (m[tuple(lead)]).any():
            return True
        inner = [slice(None)] * dim
        outer = [slice(None)] * dim
        inner[axis] = slice(0, m.shape[axis] - 1)
        outer[axis] = slice(1, m.shape[axis])
        if (m[tuple(inner)] & ~mask[tuple(outer)]).any():
            return True
        if (m[tuple(outer)] & ~mask[tuple(inner)]).any():
            return True
    return False


def suite_eigen(seed: int = 0) -> list[CheckResult]:
    out = []
    dom = _interval_domain(6, 0.25)
    worst = math.inf
    for p in (2.0, 1.5):
        tab = build_table(covering_params(dom.grid, 0.5, p), dom.grid)
        res = solve_eigen(dom, tab, seed=seed)
        lower = 1.0 / poincare_constant(dom, 0.5, p)
        worst = min(worst, res.lam - lower * (1.0 - REL_SLACK))
        recomputed = seminorm(res.field, tab)
        worst = min(worst, 1e-10 - abs(recomputed - res.lam) / res.lam)
        norm = res.field.lp_norm_pow(p)
        worst = min(worst, 1e-12 - abs(norm - 1.0))
    out.append(CheckResult("eigen-invariants", worst >= 0.0, worst, {}))
    return out


def suite_nikolskii(trials: int = 200, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    worst = math.inf
    dom = _interval_domain(10, 0.2)
    grid2 = GridSpec(2, (5, 5), 0.2, (0.0, 0.0))
    dom2 = GridDomain(grid2, np.ones((5, 5), dtype=bool))
    for k in range(trials):
        if k % 2 == 0:
            d, s, p = dom, float(rng.uniform(0.15, 0.85)), float(rng.choice([1.0, 1.5, 2.0]))
        else:
            d, s, p = dom2, float(rng.uniform(0.15, 0.85)), 1.0
        if s * p >= 0.95:
            continue
        tab = build_table(covering_params(d.grid, s, p), d.grid)
        vals = rng.standard_normal(d.grid.shape)
        vals[~d.mask] = 0.0
        f = ScalarField(d, vals)
        bound_rhs = nikolskii_bound(f, tab)
        for _ in range(4):
            shift = rng.integers(-6, 7, size=d.grid.dim)
            if not shift.any():
                shift[0] = 1
            ratio = nikolskii_ratio(f, tab, shift)
            worst = min(worst, bound_rhs - ratio)
    return [CheckResult("nikolskii-bound", worst >= 0.0, worst, {"trials": trials})]


SUITES = {
    "pointwise": suite_pointwise_fast,
    "coarea": suite_coarea,
    "interpolation": suite_interpolation,
    "isoperimetric": suite_isoperimetric,
    "kernel": suite_kernel,
    "cheeger": suite_cheeger,
    "eigen": suite_eigen,
    "nikolskii": suite_nikolskii,
}


def run_suites(names, trials: int | None = None, seed: int = 0) -> list[CheckResult]:
    results = []
    for name in names:
        fn = SUITES[name]
        kwargs = {"seed": seed}
        if trials is not None and name in ("pointwise", "coarea", "isoperimetric", "nikolskii"):
            kwargs["trials"] = trials
        results.extend(fn(**kwargs))
    return results
