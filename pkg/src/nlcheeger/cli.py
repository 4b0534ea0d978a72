"""Batch front end: one subcommand per study, JSON for scalars and sets,
CSV for series.  Runs are reproducible byte-for-byte from (flags, seed).

Exit codes: 0 ok, 2 configuration error, 3 verification failure,
4 solver nonconvergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .geometry import (
    DomainError,
    GridDomain,
    GridSpec,
    annulus,
    ball,
    box,
    interval,
    load_mask_file,
    mask_to_rle,
    measure,
    rasterize,
)
from .kernel import CACHE_ENV_VAR, KernelError, KernelParams, build_table, covering_radius
from .functional import boundary_face_midpoints, nonlocal_mean_curvature, save_field_csv
from .cheeger import solve_cheeger, s_to_1_sweep
from .eigen import p_to_1_sweep, solve_eigen
from . import verify as verify_mod


class ConfigError(ValueError):
    pass


def _build_domain(args) -> GridDomain:
    if args.mask_file:
        return load_mask_file(args.mask_file)
    n = args.cells
    if args.shape == "interval":
        if args.len is None:
            raise ConfigError("interval needs --len")
        grid = GridSpec(1, (n,), args.len / n, (0.0,))
        return rasterize(interval(0.0, args.len), grid)
    if args.shape == "square":
        if args.len is None:
            raise ConfigError("square needs --len")
        grid = GridSpec(2, (n, n), args.len / n, (0.0, 0.0))
        return rasterize(box([args.len / 2.0] * 2, [args.len / 2.0] * 2), grid)
    if args.shape == "ball":
        r = args.radius
        if r is None:
            raise ConfigError("ball needs --radius")
        dim = args.dim
        grid = GridSpec(dim, (n,) * dim, 2.0 * r / n, (-r,) * dim)
        return rasterize(ball([0.0] * dim, r), grid)
    if args.shape == "annulus":
        if args.inner is None or args.outer is None:
            raise ConfigError("annulus needs --inner and --outer")
        r = args.outer
        grid = GridSpec(2, (n, n), 2.0 * r / n, (-r, -r))
        return rasterize(annulus([0.0, 0.0], args.inner, args.outer), grid)
    raise ConfigError(f"unknown shape {args.shape!r}")


def _build_table(domain: GridDomain, s: float, p: float, args):
    grid = domain.grid
    radius = args.truncation if args.truncation else covering_radius(grid)
    if radius < 3.0 * grid.spacing:
        radius = 3.0 * grid.spacing
    params = KernelParams(dim=grid.dim, s=s, p=p, truncation_radius=radius)
    return build_table(params, grid, cache_dir=args.cache_dir or os.environ.get(CACHE_ENV_VAR))


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _dump_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1, default=_json_default)
        fh.write("\n")


def _dump_csv(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_perimeter(args) -> int:
    from .functional import s_perimeter

    dom = _build_domain(args)
    tab = _build_table(dom, args.s, 1.0, args)
    ps = s_perimeter(dom.mask, tab, dom.grid)
    payload = {
        "P_s": ps,
        "s": args.s,
        "measure": measure(dom),
        "cells": int(dom.cell_count),
        "spacing": dom.grid.spacing,
    }
    _dump_json(os.path.join(args.out, "perimeter.json"), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_cheeger(args) -> int:
    dom = _build_domain(args)
    tab = _build_table(dom, args.s, 1.0, args)
    res = solve_cheeger(dom, tab)
    payload = {
        "h": res.h,
        "set_mask_rle": mask_to_rle(res.optimal_set.member),
        "iterations": [[lam, val] for lam, val in res.iterations],
        "dual_sup_norm": res.dual_sup_norm,
        "dual_residual": res.dual_residual,
        "calibrable": res.calibrable,
        "s": args.s,
    }
    _dump_json(os.path.join(args.out, "cheeger.json"), payload)
    print(json.dumps({"h": res.h, "calibrable": res.calibrable}, sort_keys=True))
    return 0


def cmd_eigen(args) -> int:
    dom = _build_domain(args)
    tab = _build_table(dom, args.s, args.p, args)
    res = solve_eigen(dom, tab, seed=args.seed)
    payload = {
        "s": res.s,
        "p": res.p,
        "lambda": res.lam,
        "el_residual": res.el_residual,
        "el_residual_raw": res.el_residual_raw,
        "converged": res.converged,
        "iterations": res.iterations,
    }
    _dump_json(os.path.join(args.out, "eigen.json"), payload)
    save_field_csv(res.field, os.path.join(args.out, "eigenfield.csv"))
    print(json.dumps({"lambda": res.lam, "converged": res.converged}, sort_keys=True))
    return 0 if res.converged else 4


def cmd_sweep_p(args) -> int:
    dom = _build_domain(args)
    p_list = [float(v) for v in args.p_list.split(",")]

    def builder(p):
        return _build_table(dom, args.s, p, args)

    rows = p_to_1_sweep(dom, args.s, p_list, builder, builder(1.0), seed=args.seed)
    _dump_csv(
        os.path.join(args.out, "sweep_p.csv"),
        ["p", "lambda", "target_h_s", "gap"],
        [[r["p"], r["lambda"], r["target_h_s"], r["gap"]] for r in rows],
    )
    _dump_json(os.path.join(args.out, "sweep_p.json"), {"rows": rows})
    print(json.dumps({"final_gap": rows[-1]["gap"]}, sort_keys=True))
    return 0 if all(r["converged"] for r in rows) else 4


def cmd_sweep_s(args) -> int:
    dom = _build_domain(args)
    s_list = [float(v) for v in args.s_list.split(",")]

    def builder(s):
        return _build_table(dom, s, 1.0, args)

    rows = s_to_1_sweep(dom, s_list, builder)
    _dump_csv(
        os.path.join(args.out, "sweep_s.csv"),
        ["s", "value", "target"],
        [[r["s"], r["value"], r["target"]] for r in rows],
    )
    _dump_json(os.path.join(args.out, "sweep_s.json"), {"rows": rows})
    print(json.dumps({"final_value": rows[-1]["value"], "target": rows[-1]["target"]}, sort_keys=True))
    return 0


def cmd_curvature(args) -> int:
    dom = _build_domain(args)
    tab = _build_table(dom, args.s, 1.0, args)
    res = solve_cheeger(dom, tab)
    member = res.optimal_set.member
    pts = boundary_face_midpoints(dom.grid, member, interior=dom.mask)
    if len(pts) == 0:
        pts = boundary_face_midpoints(dom.grid, member)
    k = max(1, len(pts) // max(args.points, 1))
    pts = pts[::k][: args.points]
    delta = args.delta_cells * dom.grid.spacing
    values = []
    for x0 in pts:
        h_val = nonlocal_mean_curvature(dom.grid, member, x0, tab, delta)
        values.append({"x0": [float(v) for v in x0], "curvature": h_val})
    payload = {"h": res.h, "target": -res.h, "points": values}
    _dump_json(os.path.join(args.out, "curvature.json"), payload)
    print(json.dumps({"h": res.h, "n_points": len(values)}, sort_keys=True))
    return 0


def cmd_verify(args) -> int:
    names = list(verify_mod.SUITES) if args.suite == "all" else [args.suite]
    results = verify_mod.run_suites(names, trials=args.trials, seed=args.seed)
    rows = []
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        ok = ok and r.passed
        print(f"[{status}] {r.name}: margin={r.margin:.3e} {r.details}")
        rows.append({"name": r.name, "passed": r.passed, "margin": r.margin, "details": r.details})
    _dump_json(os.path.join(args.out, "verify.json"), {"checks": rows, "passed": ok})
    return 0 if ok else 3


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlcheeger", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_p=False):
        p.add_argument("--shape", choices=["interval", "square", "ball", "annulus"], default="interval")
        p.add_argument("--mask-file", default=None)
        p.add_argument("--len", type=float, default=None)
        p.add_argument("--radius", type=float, default=None)
        p.add_argument("--inner", type=float, default=None)
        p.add_argument("--outer", type=float, default=None)
        p.add_argument("--dim", type=int, default=1, choices=[1, 2])
        p.add_argument("--cells", type=int, default=16)
        p.add_argument("--s", type=float, default=0.5)
        if with_p:
            p.add_argument("--p", type=float, default=2.0)
        p.add_argument("--truncation", type=float, default=None, help="kernel truncation radius; default covers the window")
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cache-dir", default=None)

    p = sub.add_parser("perimeter", help="s-perimeter of a shape")
    common(p)
    p.set_defaults(fn=cmd_perimeter)

    p = sub.add_parser("cheeger", help="nonlocal Cheeger constant and optimal set")
    common(p)
    p.set_defaults(fn=cmd_cheeger)

    p = sub.add_parser("eigen", help="first fractional p-Laplacian eigenvalue")
    common(p, with_p=True)
    p.set_defaults(fn=cmd_eigen)

    p = sub.add_parser("sweep-p", help="eigenvalues along p -> 1 against the Cheeger constant")
    common(p)
    p.add_argument("--p-list", default="2,1.5,1.25,1.1,1.05")
    p.set_defaults(fn=cmd_sweep_p)

    p = sub.add_parser("sweep-s", help="(1-s) h_s along s -> 1 against the local limit")
    common(p)
    p.add_argument("--s-list", default="0.5,0.6,0.7,0.8,0.9,0.95")
    p.set_defaults(fn=cmd_sweep_s)

    p = sub.add_parser("curvature", help="nonlocal mean curvature on the Cheeger set boundary")
    common(p)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--delta-cells", type=float, default=2.5)
    p.set_defaults(fn=cmd_curvature)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--suite", default="all", choices=["all"] + list(verify_mod.SUITES))
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed the message; normalize the exit code
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except (ConfigError, DomainError, KernelError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stdout)
        return 2


if __name__ == "__main__":
    sys.exit(main())
