"""First eigenvalue of the fractional p-Laplacian by Rayleigh-quotient descent.

The quotient seminorm(u) / ||u||_p^p is minimized directly over fields
vanishing outside the domain: projected gradient descent with
Barzilai-Borwein steps, Armijo backtracking, absolute-value projection
(which never increases the quotient) and several deterministic restarts.
The solver works in spacing-free variables, so grid rescalings change the
eigenvalue by exactly spacing^(-s*p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GridDomain, measure
from .kernel import KernelTable
from .functional import ScalarField, _check_table, bind, isoperimetric_reference

_MAX_BACKTRACK = 45


class EigenError(RuntimeError):
    """Raised for invalid eigenproblem arguments."""


@dataclass
class EigenResult:
    s: float
    p: float
    lam: float
    field: ScalarField
    el_residual: float  # backward (tie-aware) stationarity residual
    el_residual_raw: float
    converged: bool
    iterations: int
    restart_values: list[float]
    trace: list[float] = field(repr=False, default_factory=list)


def _residual(grad, lam_unit, phi_u):
    scale = lam_unit * float(np.abs(phi_u).max())
    return float(np.abs(grad - lam_unit * phi_u).max()) / max(scale, 1e-300)


#: relative difference below which a cell pair counts as numerically tied
TIE_TOL = 1e-6


def _el_residuals(nbh, x, p, lam_unit):
    """Raw and backward (tie-aware) stationarity residuals.

    For p < 2 the map d -> |d|^(p-1) has unbounded inverse sensitivity at
    d = 0; near p = 1 the exact minimizer separates tied components by
    amounts far below float64 resolution (a target coupling of 0.1 at
    p = 1.05 needs |u_i - u_j| ~ 1e-20), so no representable point
    satisfies the raw equations.  The backward residual reports the
    stationarity defect of the best point within relative distance TIE_TOL
    of the iterate: pairs closer than that contribute the coupling freedom
    theta = (TIE_TOL * scale)^(p-1) such a perturbation can realize.
    """
    rows = np.repeat(np.arange(nbh.n), np.diff(nbh.start))
    d = x[rows] - x[nbh.cols]
    phi_d = np.sign(d) * np.abs(d) ** (p - 1.0)
    phi_x = np.sign(x) * np.abs(x) ** (p - 1.0)
    a_op = 2.0 * np.bincount(rows, weights=nbh.ws * phi_d, minlength=nbh.n)
    a_op += nbh.zero_w * phi_x
    raw_rows = np.abs(a_op - lam_unit * phi_x)
    scale = float(np.abs(x).max())
    theta = (TIE_TOL * scale) ** (p - 1.0)
    tied = np.abs(d) <= TIE_TOL * scale
    slack = 2.0 * np.bincount(rows, weights=nbh.ws * tied * (theta + np.abs(phi_d)), minlength=nbh.n)
    slack += nbh.zero_w * theta * (np.abs(x) <= TIE_TOL * scale)
    denom = max(lam_unit * float(np.abs(phi_x).max()), 1e-300)
    raw = float(raw_rows.max()) / denom
    sub = float(np.maximum(raw_rows - slack, 0.0).max()) / denom
    return raw, sub


#: active-cell count up to which the dense pair matrix is used
_DENSE_LIMIT = 1500


class _Evaluator:
    """Fast Rayleigh-quotient evaluations over the active cells.

    Small problems use a dense pair-weight matrix (one broadcast per
    evaluation); large ones fall back to the per-offset shift sums."""

    def __init__(self, bound, mask, nbh):
        self.bound = bound
        self.mask = mask
        self.nbh = nbh
        self.p = None
        if nbh.n <= _DENSE_LIMIT:
            w = np.zeros((nbh.n, nbh.n))
            rows = np.repeat(np.arange(nbh.n), np.diff(nbh.start))
            w[rows, nbh.cols] = nbh.ws
            self.w_dense = w
        else:
            self.w_dense = None

    def seminorm(self, x, p):
        if self.w_dense is not None:
            d = np.abs(x[:, None] - x[None, :])
            pair = float((self.w_dense * d**p).sum())
            return pair + float(self.nbh.zero_w @ np.abs(x) ** p)
        u = np.zeros(self.mask.size)
        u[self.mask.reshape(-1)] = x
        return self.bound.seminorm_unit(u.reshape(self.bound.shape), p)

    def a_op(self, x, p):
        """Nonlocal operator A_i = 2 sum_j W |d|^(p-2) d + zw |x|^(p-2) x."""
        phi_x = np.sign(x) * np.abs(x) ** (p - 1.0)
        if self.w_dense is not None:
            d = x[:, None] - x[None, :]
            phi_d = np.sign(d) * np.abs(d) ** (p - 1.0)
            return 2.0 * (self.w_dense * phi_d).sum(axis=1) + self.nbh.zero_w * phi_x
        u = np.zeros(self.mask.size)
        u[self.mask.reshape(-1)] = x
        a_full = self.bound.grad_unit(u.reshape(self.bound.shape), p)
        return a_full.reshape(-1)[self.mask.reshape(-1)]


def _descend(ev: _Evaluator, x0, p, tol, max_iter):
    """Minimize the unit-spacing Rayleigh quotient from one start."""

    def norm_pow(x):
        return float((np.abs(x) ** p).sum())

    def value_and_grad(x):
        s_val = ev.seminorm(x, p)
        a_op = ev.a_op(x, p)
        n_val = norm_pow(x)
        r = s_val / n_val
        phi = np.sign(x) * np.abs(x) ** (p - 1.0)
        grad = p * (a_op - r * phi) / n_val
        return r, grad, a_op, phi

    def value(x):
        return ev.seminorm(x, p) / norm_pow(x)

    x = np.abs(np.asarray(x0, dtype=float))
    x /= norm_pow(x) ** (1.0 / p)
    r, grad, a_op, phi = value_and_grad(x)
    trace = [r]
    step = 1.0 / max(float(np.abs(grad).max()), 1e-12)
    prev_x = prev_grad = None
    resid = _residual(a_op, r, phi)
    it = 0
    for it in range(max_iter):
        if resid <= tol:
            break
        if prev_x is not None:
            dx = x - prev_x
            dg = grad - prev_grad
            denom = float(dx @ dg)
            if denom > 0.0:
                step = float(dx @ dx) / denom
            step = min(max(step, 1e-14), 1e10)
        gnorm2 = float(grad @ grad)
        t = step
        accepted = False
        for _ in range(_MAX_BACKTRACK):
            cand = np.abs(x - t * grad)
            if not cand.any():
                t *= 0.5
                continue
            cand /= norm_pow(cand) ** (1.0 / p)
            r_new = value(cand)
            if r_new <= r - 1e-4 * t * gnorm2 or r_new < r * (1.0 - 1e-15):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        prev_x, prev_grad = x, grad
        x = cand
        r, grad, a_op, phi = value_and_grad(x)
        resid = _residual(a_op, r, phi)
        trace.append(r)
    return x, r, resid, it + 1, trace


class _Neighborhood:
    """Per-cell coupling structure for coordinate minimization: active
    neighbours with weights, plus the scalar coupling to all zero territory."""

    def __init__(self, bound, mask):
        shape = bound.shape
        active_flat = np.flatnonzero(mask.reshape(-1))
        self.n = len(active_flat)
        ids = -np.ones(mask.size, dtype=np.int64)
        ids[active_flat] = np.arange(self.n)
        ids_grid = ids.reshape(shape)
        rows, cols, ws = [], [], []
        for off, w in zip(bound.win_offsets, bound.win_weights):
            sl = bound._shift_slices(off)
            if sl is None:
                continue
            src, dst = sl
            both = mask[src] & mask[dst]
            if not both.any():
                continue
            rows.append(ids_grid[src][both])
            cols.append(ids_grid[dst][both])
            ws.append(np.full(int(both.sum()), w))
        if rows:
            rows = np.concatenate(rows)
            cols = np.concatenate(cols)
            ws = np.concatenate(ws)
            order = np.lexsort((cols, rows))
            rows, self.cols, self.ws = rows[order], cols[order], ws[order]
            self.start = np.searchsorted(rows, np.arange(self.n + 1))
        else:
            self.cols = np.zeros(0, dtype=np.int64)
            self.ws = np.zeros(0)
            self.start = np.zeros(self.n + 1, dtype=np.int64)
        # coupling of each cell with everything held at zero
        self.zero_w = 2.0 * bound.cell_complement_unit(mask).reshape(-1)[active_flat]

    def row(self, i):
        sl = slice(self.start[i], self.start[i + 1])
        return self.cols[sl], self.ws[sl]


def _coordinate_polish(ev: _Evaluator, nbh, x, p, tol, max_sweeps):
    """Cyclic exact 1D quotient minimizations; monotone in the quotient and
    drives the per-cell stationarity residual to zero."""

    def full_value(z):
        return ev.seminorm(z, p)

    s_tot = full_value(x)
    n_tot = float((x**p).sum())
    golden = (math.sqrt(5.0) - 1.0) / 2.0
    trace = []
    resid = math.inf
    for sweep in range(max_sweeps):
        for i in range(nbh.n):
            cols, ws = nbh.row(i)
            uj = x[cols]
            z_i = nbh.zero_w[i]
            t_old = x[i]
            s_i_old = 2.0 * float(ws @ np.abs(t_old - uj) ** p) + z_i * t_old**p
            s_rest = s_tot - s_i_old
            n_rest = n_tot - t_old**p

            def g(t):
                s_i = 2.0 * float(ws @ np.abs(t - uj) ** p) + z_i * t**p
                return (s_rest + s_i) / (n_rest + t**p)

            hi = max(float(uj.max()) if len(uj) else t_old, t_old, 1e-12) * 1.5
            probes = np.sort(
                np.concatenate([[0.0, t_old], np.geomspace(hi * 1e-9, hi, 22)])
            )
            vals = np.array([g(t) for t in probes])
            k = int(vals.argmin())
            lo_b = probes[max(k - 1, 0)]
            hi_b = probes[min(k + 1, len(probes) - 1)]
            a, b = lo_b, hi_b
            c = b - golden * (b - a)
            d = a + golden * (b - a)
            fc, fd = g(c), g(d)
            for _ in range(60):
                if fc < fd:
                    b, d, fd = d, c, fc
                    c = b - golden * (b - a)
                    fc = g(c)
                else:
                    a, c, fc = c, d, fd
                    d = a + golden * (b - a)
                    fd = g(d)
            t_new = 0.5 * (a + b)
            if g(t_new) > vals[k]:
                t_new = probes[k]
            s_i_new = 2.0 * float(ws @ np.abs(t_new - uj) ** p) + z_i * t_new**p
            s_tot = s_rest + s_i_new
            n_tot = n_rest + t_new**p
            x[i] = t_new
        # renormalize and refresh accumulators to stop drift
        x /= n_tot ** (1.0 / p)
        s_tot = full_value(x)
        n_tot = float((x**p).sum())
        r = s_tot / n_tot
        _, resid = _el_residuals(nbh, x, p, r)
        trace.append(r)
        if resid <= tol:
            break
    return x, trace, resid


def _group_newton(nbh, x, p, rel=1e-7, max_steps=60):
    """Newton refinement on the tie-reduced stationarity system.

    Components within rel of each other are frozen into groups (the exact
    minimizer separates them by sub-resolution amounts); Newton then solves
    the stationarity equations for the group values and the multiplier
    jointly, which converges quadratically where coordinate descent crawls.
    Returns the expanded iterate, or None when the reduction is singular.
    """
    scale = float(np.abs(x).max())
    order = np.argsort(x)
    xs = x[order]
    gid_sorted = np.concatenate([[0], np.cumsum(np.diff(xs) > rel * scale)])
    gid = np.empty(len(x), dtype=np.int64)
    gid[order] = gid_sorted
    n_groups = int(gid.max()) + 1
    t = np.zeros(n_groups)
    m = np.zeros(n_groups)
    for g in range(n_groups):
        sel = gid == g
        t[g] = x[sel].mean()
        m[g] = sel.sum()
    zw = np.bincount(gid, weights=nbh.zero_w, minlength=n_groups)
    rows = np.repeat(np.arange(nbh.n), np.diff(nbh.start))
    gr, gc = gid[rows], gid[nbh.cols]
    keep = gr != gc
    if keep.any():
        key = gr[keep] * n_groups + gc[keep]
        vw = np.bincount(key, weights=nbh.ws[keep], minlength=n_groups * n_groups)
        v = vw.reshape(n_groups, n_groups)
    else:
        v = np.zeros((n_groups, n_groups))

    def phi(z):
        return np.sign(z) * np.abs(z) ** (p - 1.0)

    def system(t, lam):
        dmat = t[:, None] - t[None, :]
        f = 2.0 * (v * phi(dmat)).sum(axis=1) + zw * phi(t) - lam * m * phi(t)
        g_con = float((m * t**p).sum()) - 1.0
        return f, g_con

    lam = None
    for _ in range(max_steps):
        dmat = t[:, None] - t[None, :]
        phid = phi(dmat)
        a_g = 2.0 * (v * phid).sum(axis=1) + zw * phi(t)
        if lam is None:
            lam = float((t * a_g).sum()) / float((m * t**p).sum())
        f, g_con = system(t, lam)
        err = max(float(np.abs(f).max()), abs(g_con))
        if err <= 1e-13 * max(lam, 1.0):
            break
        with np.errstate(divide="ignore"):
            curv = np.abs(dmat) ** (p - 2.0)
        np.fill_diagonal(curv, 0.0)
        curv = np.where(np.isfinite(curv), curv, 0.0)
        jac = np.zeros((n_groups + 1, n_groups + 1))
        off_diag = -2.0 * (p - 1.0) * v * curv
        jac[:n_groups, :n_groups] = off_diag
        diag = 2.0 * (p - 1.0) * (v * curv).sum(axis=1) + (p - 1.0) * (zw - lam * m) * np.abs(t) ** (
            p - 2.0
        )
        jac[np.arange(n_groups), np.arange(n_groups)] += diag
        jac[:n_groups, n_groups] = -m * phi(t)
        jac[n_groups, :n_groups] = p * m * phi(t)
        rhs = -np.concatenate([f, [g_con]])
        try:
            step = np.linalg.solve(jac, rhs)
        except np.linalg.LinAlgError:
            return None
        # damped update keeping group values positive and ordered apart
        damp = 1.0
        for _ in range(30):
            t_new = t + damp * step[:n_groups]
            lam_new = lam + damp * step[n_groups]
            if np.all(t_new > 0.0):
                f_new, g_new = system(t_new, lam_new)
                if max(float(np.abs(f_new).max()), abs(g_new)) < err:
                    break
            damp *= 0.5
        else:
            break
        t, lam = t_new, lam_new
    if not np.all(np.isfinite(t)) or np.any(t <= 0.0):
        return None
    y = t[gid]
    return y / float((np.abs(y) ** p).sum()) ** (1.0 / p)


def _snap_ties(x, rel=1e-7):
    """Collapse groups of nearly equal components to their mean.

    Near p = 1 the exact minimizer separates tied components by amounts far
    below float resolution; snapping realizes the representable limit point
    of such clusters without materially changing the quotient."""
    scale = float(np.abs(x).max())
    order = np.argsort(x)
    xs = x[order]
    groups = np.concatenate([[0], np.cumsum(np.diff(xs) > rel * scale)])
    out = xs.copy()
    for gid in np.unique(groups):
        sel = groups == gid
        out[sel] = xs[sel].mean()
    y = np.empty_like(x)
    y[order] = out
    return y


def solve_eigen(
    domain: GridDomain,
    table: KernelTable,
    seed: int = 0,
    n_restarts: int = 5,
    max_iter: int = 2000,
    extra_starts=None,
    tol: float | None = None,
    polish_sweeps: int = 60,
) -> EigenResult:
    """Best of several descent runs: random restarts plus a constant start
    (plus caller-provided warm starts); nonconvergence is flagged, not raised."""
    grid = domain.grid
    _check_table(table, grid)
    p = table.params.p
    s = table.params.s
    if p <= 1.0:
        raise EigenError("p must exceed 1; the p = 1 problem is the Cheeger problem")
    bound = bind(table, grid)
    mask = domain.mask
    n_active = int(mask.sum())
    if tol is None:
        # stationarity targets: smooth regime tight, kinked regime looser
        tol = 1e-7 if p >= 2.0 else (1e-5 if p > 1.2 else 1e-4)

    rng = np.random.default_rng(seed)
    starts = [np.ones(n_active)]
    for _ in range(n_restarts):
        starts.append(rng.random(n_active) + 0.05)
    if extra_starts is not None:
        for e in extra_starts:
            v = np.asarray(e, dtype=float).reshape(-1)
            starts.append(v[mask.reshape(-1)] if v.size == mask.size else v)

    nbh = _Neighborhood(bound, mask)
    ev = _Evaluator(bound, mask, nbh)
    best = None
    restart_values = []
    for x0 in starts:
        x, r, resid, iters, trace = _descend(ev, x0, p, tol, max_iter)
        restart_values.append(r)
        if best is None or r < best[1]:
            best = (x, r, resid, iters, trace)
    x, r_unit, resid, iters, trace = best

    def quotient_of(z):
        return ev.seminorm(z, p) / float((np.abs(z) ** p).sum())

    raw, resid = _el_residuals(nbh, x, p, r_unit)
    if resid > tol and polish_sweeps > 0 and p < 2.0:
        x, extra_trace, resid = _coordinate_polish(ev, nbh, x.copy(), p, tol, polish_sweeps)
        trace = trace + extra_trace
        r_unit = quotient_of(x)
        iters += len(extra_trace)
        raw, resid = _el_residuals(nbh, x, p, r_unit)
    if resid > tol and p < 2.0:
        for rel in (1e-7, 1e-5, 1e-4):
            x_try = _group_newton(nbh, x.copy(), p, rel=rel)
            if x_try is None:
                x_try = _snap_ties(x, rel)
                x_try /= float((np.abs(x_try) ** p).sum()) ** (1.0 / p)
            r_try = quotient_of(x_try)
            if r_try <= r_unit * (1.0 + 1e-11):
                raw_t, resid_t = _el_residuals(nbh, x_try, p, r_try)
                if resid_t < resid:
                    x, r_unit, raw, resid = x_try, r_try, raw_t, resid_t
                    trace = trace + [r_try]
            if resid <= tol:
                break

    # physical normalization: ||u||_{L^p} = 1 including cell volumes
    u_phys = x * grid.cell_volume ** (-1.0 / p)
    fieldv = ScalarField.from_active(domain, u_phys)
    lam_phys = r_unit * grid.spacing ** (-s * p)
    return EigenResult(
        s=s,
        p=p,
        lam=lam_phys,
        field=fieldv,
        el_residual=resid,
        el_residual_raw=raw,
        converged=resid <= tol,
        iterations=iters,
        restart_values=restart_values,
        trace=trace,
    )


def linfty_check(result: EigenResult, domain: GridDomain, h_s: float) -> tuple[float, float]:
    """Sup norm of the eigenfield and the p -> 1 limit bound
    [|B|^((N-s)/N) / P_s(B)]^(N/s) * h_s^(N/s)."""
    dim = domain.grid.dim
    s = result.s
    sup = float(np.abs(result.field.values).max())
    ref = isoperimetric_reference(dim, s)
    bound_val = (h_s / ref) ** (dim / s)
    return sup, bound_val


def p_to_1_sweep(
    domain: GridDomain,
    s: float,
    p_list,
    table_builder,
    cheeger_table: KernelTable,
    seed: int = 0,
) -> list[dict]:
    """Eigenvalues along decreasing p with the Cheeger constant as target.

    Runs are warm-started by continuation (previous minimizer) plus the
    indicator of the Cheeger set, on top of the standard restarts.
    """
    from .cheeger import solve_cheeger

    ch = solve_cheeger(domain, cheeger_table)
    target = ch.h
    indicator = ch.optimal_set.member.astype(float)
    rows = []
    prev_field = None
    for p in p_list:
        table = table_builder(p)
        extras = [indicator]
        if prev_field is not None:
            extras.append(prev_field)
        res = solve_eigen(domain, table, seed=seed, extra_starts=extras)
        prev_field = res.field.values.copy()
        rows.append(
            {
                "p": p,
                "lambda": res.lam,
                "target_h_s": target,
                "gap": abs(res.lam - target) / target,
                "converged": res.converged,
            }
        )
    return rows


def faber_krahn_eigen(
    dom_a: GridDomain,
    table_a: KernelTable,
    dom_b: GridDomain,
    table_b: KernelTable,
    seed: int = 0,
) -> tuple[float, float]:
    """Scale-invariant products |Omega|^(s p / N) lambda for domain vs ball."""
    s, p = table_a.params.s, table_a.params.p
    dim = dom_a.grid.dim
    ra = solve_eigen(dom_a, table_a, seed=seed)
    rb = solve_eigen(dom_b, table_b, seed=seed)
    lhs = measure(dom_a) ** (s * p / dim) * ra.lam
    rhs = measure(dom_b) ** (s * p / dim) * rb.lam
    return lhs, rhs
