"""Truncated-domain geometry for nonlocal problems.

The whole space is represented by a uniform tensor grid on the box [-R, R]^n
(n = 1 or 2) plus an analytic tail model describing the field beyond the box.
Each node owns the cell of side h centered on it, so the cells tile
[-R - h/2, R + h/2]^n exactly; every kernel quadrature in this package is an
integral over those cells plus a closed-form integral over the tail region.

The working domain Omega (an interval, rectangle or disc) sits strictly inside
the box with a generous margin, so that truncation only ever touches the far
field of the kernel |z|^(-n-2s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def normalization_constant(n: int, s: float) -> float:
    """Kernel constant c_{n,s} = 4^s Gamma(n/2+s) / (pi^(n/2) |Gamma(-s)|).

    With this constant the operator has Fourier symbol |xi|^(2s) exactly.
    |Gamma(-s)| is evaluated as Gamma(1-s)/s to stay on the positive axis.
    """
    if not 0.0 < s < 0.5:
        raise ValueError(f"s must lie in (0, 1/2) strictly, got {s}")
    if n not in (1, 2):
        raise ValueError(f"only n in {{1, 2}} is supported, got {n}")
    return 4.0**s * math.gamma(n / 2.0 + s) * s / (math.pi ** (n / 2.0) * math.gamma(1.0 - s))


@dataclass(frozen=True)
class TailModel:
    """Analytic description of a field outside the box.

    kind == "const":  the field equals `value` everywhere beyond the box.
    kind == "split":  the field equals `left` where coordinate `axis` < `pivot`
                      and `right` where it is >= pivot (pivot strictly inside
                      the box).  This covers sign-like exterior data and
                      half-space phases, whose exteriors are not constant.
    """

    kind: str
    value: float = 0.0
    axis: int = 0
    pivot: float = 0.0
    left: float = 0.0
    right: float = 0.0

    @staticmethod
    def const(value: float) -> "TailModel":
        return TailModel(kind="const", value=float(value))

    @staticmethod
    def split(pivot: float, left: float, right: float, axis: int = 0) -> "TailModel":
        return TailModel(kind="split", axis=int(axis), pivot=float(pivot),
                         left=float(left), right=float(right))

    def regions(self) -> list[float]:
        """Tail values by region, in the fixed (left, right) order for splits."""
        if self.kind == "const":
            return [self.value]
        return [self.left, self.right]

    def is_zero(self) -> bool:
        return all(v == 0.0 for v in self.regions())


@dataclass(frozen=True)
class FracContext:
    """Grid-and-kernel context shared by every operation.

    nodes_per_axis counts nodes on one axis; total nodes are nodes_per_axis^n.
    axis_coords are the node coordinates (identical on both axes in 2D).
    """

    n: int
    s: float
    h: float
    R: float
    c_ns: float
    nodes_per_axis: int
    axis_coords: np.ndarray = field(compare=False, repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nodes_per_axis,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def box_edge(self) -> float:
        """Outer edge of the cell tiling, R + h/2."""
        return self.R + 0.5 * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Node coordinate arrays, broadcast to the grid shape."""
        if self.n == 1:
            return (self.axis_coords,)
        x = self.axis_coords
        return tuple(np.meshgrid(x, x, indexing="ij"))


@dataclass(frozen=True)
class Domain:
    """Masks carving the working set Omega out of the box grid."""

    desc: dict
    omega_mask: np.ndarray
    exterior_mask: np.ndarray
    boundary_nodes: np.ndarray  # flat indices of Omega nodes adjacent to exterior
    diameter: float

    @property
    def interior_count(self) -> int:
        return int(self.omega_mask.sum())


@dataclass
class GridFunction:
    """Node values over the box plus a tail model beyond it.

    valid_mask, when present, marks where the values are meaningful (used by
    operator outputs, which are only defined on Omega); values are kept finite
    everywhere regardless.
    """

    ctx: FracContext
    values: np.ndarray
    tail: TailModel | None = None
    valid_mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.ctx.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.ctx.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    def copy(self) -> "GridFunction":
        vm = None if self.valid_mask is None else self.valid_mask.copy()
        return GridFunction(self.ctx, self.values.copy(), self.tail, vm)


def _omega_masks(desc: dict, ctx: FracContext) -> tuple[np.ndarray, float, np.ndarray]:
    """Strict-interior mask, diameter, and bounding box of Omega."""
    kind = desc.get("type")
    if ctx.n == 1:
        (x,) = ctx.coords()
        if kind != "interval":
            raise ValueError(f"1D omega must be an interval, got {kind!r}")
        a, b = float(desc["a"]), float(desc["b"])
        if not a < b:
            raise ValueError(f"interval needs a < b, got a={a}, b={b}")
        mask = (x > a) & (x < b)
        return mask, b - a, np.array([[a, b]])
    x, y = ctx.coords()
    if kind == "disc":
        cx, cy, r = float(desc.get("cx", 0.0)), float(desc.get("cy", 0.0)), float(desc["r"])
        if r <= 0:
            raise ValueError(f"disc needs r > 0, got {r}")
        mask = (x - cx) ** 2 + (y - cy) ** 2 < r**2
        return mask, 2.0 * r, np.array([[cx - r, cx + r], [cy - r, cy + r]])
    if kind == "rect":
        ax, bx = float(desc["a"]), float(desc["b"])
        ay, by = float(desc["c"]), float(desc["d"])
        if not (ax < bx and ay < by):
            raise ValueError("rect needs a < b and c < d")
        mask = (x > ax) & (x < bx) & (y > ay) & (y < by)
        diam = math.hypot(bx - ax, by - ay)
        return mask, diam, np.array([[ax, bx], [ay, by]])
    raise ValueError(f"unknown 2D omega type {kind!r}")


def build_context(n: int, s: float, h: float, R: float, omega: dict) -> tuple[FracContext, Domain]:
    """Construct the grid context and the Omega masks, validating geometry.

    Raises ValueError when h does not evenly divide the box, when Omega is not
    strictly inside the box with margin >= 1.5*diam(Omega) per side, or when
    R < 2*diam(Omega).
    """
    if h <= 0 or R <= 0:
        raise ValueError("h and R must be positive")
    steps = 2.0 * R / h
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ValueError(f"h={h} does not evenly divide the box [-R, R] with R={R}")
    m = int(round(steps)) + 1
    coords = -R + h * np.arange(m)
    c_ns = normalization_constant(n, s)  # validates n, s
    ctx = FracContext(n=n, s=s, h=h, R=R, c_ns=c_ns, nodes_per_axis=m, axis_coords=coords)

    mask, diam, bbox = _omega_masks(omega, ctx)
    if not mask.any():
        raise ValueError("omega contains no grid nodes")
    margin = min(min(lo + R, R - hi) for lo, hi in bbox)
    if margin < 1.5 * diam - 1e-9:
        raise ValueError(
            f"omega too close to the box: margin {margin:.4g} < 1.5*diam = {1.5 * diam:.4g}")
    if R < 2.0 * diam - 1e-9:
        raise ValueError(f"R={R} < 2*diam(omega) = {2 * diam:.4g}")

    exterior = ~mask
    # Omega nodes with at least one axis neighbor outside Omega.
    boundary = np.zeros_like(mask)
    for ax in range(n):
        for shift in (-1, 1):
            rolled = np.roll(exterior, shift, axis=ax)
            # roll wraps around; the wrapped slice is exterior anyway (margin >= 1 node)
            boundary |= mask & rolled
    dom = Domain(desc=dict(omega), omega_mask=mask, exterior_mask=exterior,
                 boundary_nodes=np.flatnonzero(boundary.ravel()), diameter=diam)
    return ctx, dom


def impose_exterior(u: GridFunction, g: GridFunction, dom: Domain) -> GridFunction:
    """Return u with exterior nodes (and the tail model) overwritten from g."""
    if u.ctx is not g.ctx and u.ctx != g.ctx:
        raise ValueError("u and g live on different contexts")
    vals = np.where(dom.omega_mask, u.values, g.values)
    return GridFunction(u.ctx, vals, tail=g.tail, valid_mask=u.valid_mask)


def grid_function_from_callable(ctx: FracContext, fn: Callable, tail: TailModel | None = None) -> GridFunction:
    """Sample fn on the grid nodes; fn takes (x,) in 1D or (x, y) in 2D arrays."""
    vals = fn(*ctx.coords())
    return GridFunction(ctx, np.broadcast_to(np.asarray(vals, dtype=float), ctx.shape).copy(), tail=tail)
