"""Grid domains, shape rasterization and exact geometric quantities.

A domain is a finite union of closed grid cells, encoded as a boolean mask
over a rectangular window.  All geometric quantities (measure, diameter,
classical perimeter) are exact for such cell unions, which keeps every
downstream set identity crisp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def ball_volume(dim: int) -> float:
    """Volume of the unit ball; the 0-dimensional ball has measure 1."""
    if dim == 0:
        return 1.0
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0)


class DomainError(ValueError):
    """Raised for invalid grids, shapes or masks."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform rectangular grid: cells_per_axis cells of size spacing per axis."""

    dim: int
    cells_per_axis: tuple[int, ...]
    spacing: float
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.cells_per_axis) != self.dim or len(self.origin) != self.dim:
            raise DomainError("cells_per_axis/origin length must match dim")
        if any(n < 1 for n in self.cells_per_axis):
            raise DomainError("need at least one cell per axis")
        if not (self.spacing > 0.0 and math.isfinite(self.spacing)):
            raise DomainError(f"spacing must be positive, got {self.spacing}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def cell_centers(self) -> list[np.ndarray]:
        """Per-axis center coordinates; center = origin + (i + 0.5) * spacing.

        This formula is the single source of truth for cell geometry, so
        centers are reproducible bit-exactly from (origin, spacing, index).
        """
        return [
            np.asarray(self.origin[k]) + (np.arange(self.cells_per_axis[k]) + 0.5) * self.spacing
            for k in range(self.dim)
        ]

    def center_grids(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays broadcast to the full grid shape."""
        axes = self.cell_centers()
        if self.dim == 1:
            return [axes[0]]
        return list(np.meshgrid(*axes, indexing="ij"))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.origin, dtype=float)
        hi = lo + np.asarray(self.cells_per_axis, dtype=float) * self.spacing
        return lo, hi

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "cells_per_axis": list(self.cells_per_axis),
            "spacing": self.spacing,
            "origin": list(self.origin),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "GridSpec":
        return GridSpec(
            dim=int(d["dim"]),
            cells_per_axis=tuple(int(n) for n in d["cells_per_axis"]),
            spacing=float(d["spacing"]),
            origin=tuple(float(x) for x in d["origin"]),
        )


@dataclass(frozen=True)
class GridDomain:
    """A nonempty union of closed cells inside a grid window."""

    grid: GridSpec
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if mask.shape != self.grid.shape:
            raise DomainError(f"mask shape {mask.shape} != grid shape {self.grid.shape}")
        if not mask.any():
            raise DomainError("domain must contain at least one cell")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "cell_count", int(mask.sum()))

    cell_count: int = field(init=False)

    @property
    def dim(self) -> int:
        return self.grid.dim


@dataclass(frozen=True)
class ShapeSpec:
    """Deterministic shape description: a cell belongs to the rasterization
    iff its center lies inside the (closed) shape."""

    kind: str
    params: dict

    KINDS = ("interval", "box", "ball", "annulus", "mask-file")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown shape kind {self.kind!r}; expected one of {self.KINDS}")

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Closed-inclusion test for an (n, dim) array of points."""
        pts = np.atleast_2d(points)
        if self.kind in ("interval", "box"):
            center = np.asarray(self.params["center"], dtype=float)
            half = np.asarray(self.params["half_widths"], dtype=float)
            return np.all(np.abs(pts - center) <= half, axis=-1)
        if self.kind == "ball":
            center = np.asarray(self.params["center"], dtype=float)
            r = float(self.params["radius"])
            return np.einsum("ij,ij->i", pts - center, pts - center) <= r * r
        if self.kind == "annulus":
            center = np.asarray(self.params["center"], dtype=float)
            r_in = float(self.params["inner_radius"])
            r_out = float(self.params["outer_radius"])
            d2 = np.einsum("ij,ij->i", pts - center, pts - center)
            return (d2 >= r_in * r_in) & (d2 <= r_out * r_out)
        raise DomainError(f"shape kind {self.kind!r} has no analytic inclusion test")

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.kind in ("interval", "box"):
            c = np.asarray(self.params["center"], dtype=float)
            h = np.asarray(self.params["half_widths"], dtype=float)
            return c - h, c + h
        if self.kind == "ball":
            c = np.asarray(self.params["center"], dtype=float)
            r = float(self.params["radius"])
            return c - r, c + r
        if self.kind == "annulus":
            c = np.asarray(self.params["center"], dtype=float)
            r = float(self.params["outer_radius"])
            return c - r, c + r
        raise DomainError(f"shape kind {self.kind!r} has no bounds")

    def to_json(self) -> str:
        d = {"kind": self.kind}
        d.update(self.params)
        return json.dumps(d, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ShapeSpec":
        d = json.loads(text)
        kind = d.pop("kind")
        if kind == "ball":
            return ShapeSpec("ball", {"center": d["center"], "radius": float(d["radius"])})
        if kind == "annulus":
            return ShapeSpec(
                "annulus",
                {
                    "center": d["center"],
                    "inner_radius": float(d["inner_radius"]),
                    "outer_radius": float(d["outer_radius"]),
                },
            )
        if kind in ("interval", "box"):
            return ShapeSpec(kind, {"center": d["center"], "half_widths": d["half_widths"]})
        if kind == "mask-file":
            return ShapeSpec(kind, {"path": d["path"]})
        raise DomainError(f"unknown shape kind in JSON: {kind!r}")


def interval(a: float, b: float) -> ShapeSpec:
    return ShapeSpec("interval", {"center": [(a + b) / 2.0], "half_widths": [(b - a) / 2.0]})


def box(center, half_widths) -> ShapeSpec:
    return ShapeSpec("box", {"center": list(center), "half_widths": list(half_widths)})


def ball(center, radius: float) -> ShapeSpec:
    return ShapeSpec("ball", {"center": list(center), "radius": float(radius)})


def annulus(center, inner_radius: float, outer_radius: float) -> ShapeSpec:
    return ShapeSpec(
        "annulus",
        {"center": list(center), "inner_radius": float(inner_radius), "outer_radius": float(outer_radius)},
    )


def rasterize(shape: ShapeSpec, grid: GridSpec) -> GridDomain:
    """Rasterize a shape by the center-inclusion rule.

    Rejects shapes whose bounding box sticks out of the grid window, since
    cells outside the window cannot represent them.
    """
    if shape.kind == "mask-file":
        dom = load_mask_file(shape.params["path"])
        if dom.grid != grid:
            raise DomainError("mask-file grid does not match the requested grid")
        return dom
    lo, hi = shape.bounds()
    glo, ghi = grid.bounding_box()
    eps = 1e-12 * max(grid.spacing, 1.0)
    if np.any(lo < glo - eps) or np.any(hi > ghi + eps):
        raise DomainError(
            f"shape bounds [{lo}, {hi}] exceed grid window [{glo}, {ghi}]"
        )
    grids = grid.center_grids()
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    mask = shape.contains(pts).reshape(grid.shape)
    if not mask.any():
        raise DomainError("shape rasterizes to the empty set on this grid")
    return GridDomain(grid, mask)


def measure(domain: GridDomain) -> float:
    """Lebesgue measure of the cell union; exact."""
    return domain.cell_count * domain.grid.cell_volume


def mask_measure(grid: GridSpec, mask: np.ndarray) -> float:
    return float(np.count_nonzero(mask)) * grid.cell_volume


def diameter(domain: GridDomain, mask: np.ndarray | None = None) -> float:
    """Diameter of the cell union: max center distance plus one cell diagonal.

    Computed over cell boxes rather than centers, so it upper-bounds the
    continuum diameter (and is exact for boxes aligned with the axes).
    """
    grid = domain.grid
    m = domain.mask if mask is None else np.asarray(mask, dtype=bool)
    if not m.any():
        raise DomainError("diameter of the empty set is undefined")
    idx = np.argwhere(m).astype(float)
    # Max center distance per axis-separable trick is wrong in 2D; use pairwise.
    if len(idx) == 1:
        d_centers = 0.0
    else:
        diff = idx[:, None, :] - idx[None, :, :]
        d_centers = math.sqrt(float(np.max(np.einsum("ijk,ijk->ij", diff, diff))))
    return (d_centers + math.sqrt(grid.dim)) * grid.spacing


def classical_perimeter(grid: GridSpec, mask: np.ndarray) -> float:
    """Total area of mask-transition faces, including window-boundary faces."""
    m = np.asarray(mask, dtype=bool)
    if m.shape != grid.shape:
        raise DomainError("mask shape does not match grid")
    if not m.any():
        raise DomainError("classical perimeter of the empty set is undefined")
    faces = 0
    for axis in range(grid.dim):
        inner = np.diff(m.astype(np.int8), axis=axis)
        faces += int(np.abs(inner).sum())
        first = np.take(m, 0, axis=axis)
        last = np.take(m, -1, axis=axis)
        faces += int(first.sum()) + int(last.sum())
    return faces * grid.spacing ** (grid.dim - 1)


def _golden_minimize(f, lo: float, hi: float, rel_tol: float = 1e-13, max_iter: int = 400):
    """Golden-section search for a unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= rel_tol * (abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = (a + b) / 2.0
    return x, f(x)


def poincare_constant(domain: GridDomain, s: float, p: float) -> float:
    """Geometric Poincare constant: min over exterior balls of
    diam(domain ∪ ball)^(N+s·p) / |ball|.

    The search is restricted to balls tangent to the domain's bounding box
    along each axis direction, with the radius found by golden-section
    search.  The result is therefore an upper bound on the unrestricted
    infimum; its reciprocal is still a valid eigenvalue lower bound.
    """
    if not (0.0 < s < 1.0):
        raise DomainError(f"s must lie in (0, 1), got {s}")
    if p < 1.0:
        raise DomainError(f"p must be >= 1, got {p}")
    grid = domain.grid
    dim = grid.dim
    exponent = dim + s * p
    h = grid.spacing
    idx = np.argwhere(domain.mask).astype(float)
    # All cell corners, for exact sup-distances to ball centers.
    corners = []
    for corner_bits in range(2**dim):
        off = np.array([(corner_bits >> k) & 1 for k in range(dim)], dtype=float)
        corners.append(np.asarray(grid.origin) + (idx + off) * h)
    corners = np.concatenate(corners, axis=0)
    diam_omega = diameter(domain)
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    vol_unit = ball_volume(dim)

    best = math.inf
    for axis in range(dim):
        for sign in (-1.0, 1.0):
            face_center = (lo + hi) / 2.0
            face_center[axis] = hi[axis] if sign > 0 else lo[axis]

            def objective(log_r, fc=face_center.copy(), ax=axis, sg=sign):
                r = math.exp(log_r)
                center = fc.copy()
                center[ax] += sg * r
                far = math.sqrt(float(np.max(np.sum((corners - center) ** 2, axis=1)))) + r
                d = max(diam_omega, far, 2.0 * r)
                return d**exponent / (vol_unit * r**dim)

            span = max(diam_omega, h)
            _, val = _golden_minimize(objective, math.log(1e-3 * span), math.log(1e4 * span))
            best = min(best, val)
    return best


# ---------------------------------------------------------------------------
# Mask-file I/O: one ASCII header line, then rows of 0/1 characters.
# Header: "dim n1 [n2] spacing origin1 [origin2]" with floats in hex so the
# round-trip is bit-exact.
# ---------------------------------------------------------------------------


def save_mask_file(domain: GridDomain, path: str) -> None:
    grid = domain.grid
    parts = [str(grid.dim)] + [str(n) for n in grid.cells_per_axis]
    parts.append(float(grid.spacing).hex())
    parts += [float(x).hex() for x in grid.origin]
    lines = [" ".join(parts)]
    flat = domain.mask.reshape(grid.cells_per_axis[0], -1)
    for row in flat:
        lines.append("".join("1" if v else "0" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mask_file(path: str) -> GridDomain:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split()
    dim = int(head[0])
    ns = tuple(int(x) for x in head[1 : 1 + dim])
    spacing = float.fromhex(head[1 + dim])
    origin = tuple(float.fromhex(x) for x in head[2 + dim : 2 + 2 * dim])
    grid = GridSpec(dim=dim, cells_per_axis=ns, spacing=spacing, origin=origin)
    rows = [np.frombuffer(ln.encode(), dtype=np.uint8) - ord("0") for ln in lines[1:]]
    mask = np.stack(rows).astype(bool).reshape(grid.shape)
    return GridDomain(grid, mask)


def domain_from_json(text: str, grid: GridSpec) -> GridDomain:
    """Domain from a JSON shape spec, e.g. {"kind":"ball","center":[0,0],"radius":1}."""
    return rasterize(ShapeSpec.from_json(text), grid)


def mask_to_rle(mask: np.ndarray) -> list[int]:
    """Run lengths of the flattened mask, starting with the leading 0-run."""
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    runs = []
    current = False
    count = 0
    for v in flat:
        if v == current:
            count += 1
        else:
            runs.append(count)
            current = bool(v)
            count = 1
    runs.append(count)
    return runs


def rle_to_mask(runs: list[int], shape: tuple[int, ...]) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    pos = 0
    val = False
    for r in runs:
        flat[pos : pos + r] = val
        pos += r
        val = not val
    if pos != flat.size:
        raise DomainError("run lengths do not match the mask size")
    return flat.reshape(shape)
