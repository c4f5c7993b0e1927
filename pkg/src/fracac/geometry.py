"""Nonlocal perimeter, curvature, and interface utilities on the shared table.

Sets are carried as node-label fields (+1 inside, -1 outside) plus a tail
model for the phase beyond the computational box, so every perimeter-type sum
below reuses the exact cell-pair weights of :class:`~fracac.operator.FracOperator`.
That is what makes the algebraic reductions in the test suite (perimeter ==
localized energy / 2c, two-phase partition == 4 * perimeter) hold to roundoff.

The localized perimeter of E relative to a region A keeps the three cross
terms that see A:

    (E cap A) x (E^c anywhere)  +  (E minus A) x (E^c cap A)

with tail contributions folded into "anywhere" through the closed-form tail
weights.  Passing ``region=None`` means A is all of space, which is only
finite when the tail phase has a single sign.

Curvature is evaluated by exact interval calculus in 1D (the principal-value
cancellation at the probed crossing is done analytically, so flat pieces and
half-lines come out exactly) and by a symmetric annulus sum in 2D with the
near core dropped: within ``core_radius`` the set is treated as a half plane
through the probe, which contributes zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Domain, FracContext, GridFunction, TailModel
from .kernels import (
    box_tail_2d,
    box_tail_split_2d,
    interval_pair_integral,
    ray_integral,
    segment_integral,
)
from .operator import FracOperator


# ---------------------------------------------------------------------------
# phase sets and partitions


@dataclass(frozen=True)
class PhaseSet:
    """Two-phase configuration: node labels in {-1,+1}, tail model, interface.

    ``interface`` is a sorted 1D array of crossing abscissae in one dimension
    and an ``(nseg, 2, 2)`` array of segment endpoints in two dimensions.  An
    empty interface is legal (uniform phase) and flagged via ``has_interface``.
    """

    ctx: FracContext
    label: np.ndarray
    tail: TailModel
    interface: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.label, dtype=float)
        if lab.shape != self.ctx.shape:
            raise ValueError(f"label shape {lab.shape} does not match grid {self.ctx.shape}")
        if not np.all(np.isin(lab, (-1.0, 1.0))):
            raise ValueError("phase labels must be exactly -1 or +1")
        for v in self.tail.regions():
            if v not in (-1.0, 1.0):
                raise ValueError(f"tail phase {v!r} is not a +-1 label")
        object.__setattr__(self, "label", lab)

    @property
    def has_interface(self) -> bool:
        return np.asarray(self.interface).size > 0

    def complement(self) -> "PhaseSet":
        t = self.tail
        if t.kind == "const":
            tail = TailModel.const(-t.value)
        else:
            tail = TailModel.split(t.pivot, -t.left, -t.right, axis=t.axis)
        return PhaseSet(self.ctx, -self.label, tail, self.interface)

    def indicator_difference(self) -> GridFunction:
        """The +-1 field chi_E - chi_{E^c} as a grid function (same tail)."""
        return GridFunction(self.ctx, self.label.copy(), self.tail)


@dataclass(frozen=True)
class Partition:
    """Multiphase configuration: node values drawn exactly from a well set."""

    ctx: FracContext
    labels: np.ndarray
    wells: tuple
    tail: TailModel

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=float)
        wells = tuple(float(w) for w in self.wells)
        if len(set(wells)) != len(wells):
            raise ValueError("well values must be distinct")
        bad = lab[~np.isin(lab, wells)]
        if bad.size:
            raise ValueError(f"partition label {bad.flat[0]!r} lies outside the well set {wells}")
        for v in self.tail.regions():
            if v not in wells:
                raise ValueError(f"tail label {v!r} lies outside the well set {wells}")
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "wells", wells)

    def phase_mask(self, well: float) -> np.ndarray:
        return self.labels == well


def snap_to_wells(values: np.ndarray, wells) -> np.ndarray:
    """Map each value to the nearest well (ties resolve to the lower well)."""
    wells = np.asarray(sorted(float(w) for w in wells))
    idx = np.argmin(np.abs(np.asarray(values, dtype=float)[..., None] - wells), axis=-1)
    return wells[idx]


def partition_from_field(u: GridFunction, wells) -> Partition:
    labels = snap_to_wells(u.values, wells)
    t = u.tail
    if t.kind == "const":
        tail = TailModel.const(float(snap_to_wells(np.array(t.value), wells)))
    else:
        lo, hi = snap_to_wells(np.array([t.left, t.right]), wells)
        tail = TailModel.split(t.pivot, float(lo), float(hi), axis=t.axis)
    return Partition(u.ctx, labels, tuple(sorted(float(w) for w in wells)), tail)


# -- constructors for the standard analytic sets ----------------------------


def interval_phase(ctx: FracContext, a: float, b: float) -> PhaseSet:
    """E = (a, b) labelled by cell centers; exact when a, b sit on cell edges."""
    if ctx.n != 1:
        raise ValueError("interval_phase is one-dimensional")
    if not -ctx.box_edge < a < b < ctx.box_edge:
        raise ValueError("interval must lie strictly inside the box")
    x = ctx.axis_coords
    label = np.where((x > a) & (x < b), 1.0, -1.0)
    return PhaseSet(ctx, label, TailModel.const(-1.0), np.array([a, b]))


def halfline_phase(ctx: FracContext, x0: float) -> PhaseSet:
    """E = (x0, +inf); the tail keeps the two signs on either side of the box."""
    if ctx.n != 1:
        raise ValueError("halfline_phase is one-dimensional")
    x = ctx.axis_coords
    label = np.where(x > x0, 1.0, -1.0)
    return PhaseSet(ctx, label, TailModel.split(x0, -1.0, 1.0, axis=0), np.array([x0]))


def halfplane_phase(ctx: FracContext, pivot: float = 0.0, axis: int = 1) -> PhaseSet:
    if ctx.n != 2:
        raise ValueError("halfplane_phase is two-dimensional")
    level = grid_signed_field(ctx, axis, pivot)
    return extract_interface(level, 0.0)


def disc_phase(ctx: FracContext, center, radius: float) -> PhaseSet:
    if ctx.n != 2:
        raise ValueError("disc_phase is two-dimensional")
    cx, cy = (float(center[0]), float(center[1]))
    ax = ctx.axis_coords
    rad = radius - np.hypot(ax[:, None] - cx, ax[None, :] - cy)
    level = GridFunction(ctx, rad, TailModel.const(float(rad.min()) - 1.0))
    return extract_interface(level, 0.0)


def grid_signed_field(ctx: FracContext, axis: int, pivot: float) -> GridFunction:
    """Signed-coordinate level function x_axis - pivot with a split tail."""
    c = ctx.axis_coords
    if ctx.n == 1:
        vals = c - pivot
    else:
        vals = np.broadcast_to((c - pivot)[:, None] if axis == 0 else (c - pivot)[None, :], ctx.shape).copy()
    lo, hi = c[0] - pivot, c[-1] - pivot
    return GridFunction(ctx, vals, TailModel.split(pivot, lo - 1.0, hi + 1.0, axis=axis))


def box_region(ctx: FracContext, lo, hi) -> np.ndarray:
    """Boolean node mask for an axis-aligned open box (scalars broadcast)."""
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (ctx.n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (ctx.n,))
    mask = np.ones(ctx.shape, dtype=bool)
    for ax in range(ctx.n):
        inside = (ctx.axis_coords > lo[ax]) & (ctx.axis_coords < hi[ax])
        shape = [1] * ctx.n
        shape[ax] = ctx.nodes_per_axis
        mask &= inside.reshape(shape)
    return mask


# ---------------------------------------------------------------------------
# interface extraction


def extract_interface(u: GridFunction, delta: float = 0.0) -> PhaseSet:
    """Threshold u at level delta into a PhaseSet with a sub-cell interface.

    Nodes with ``u >= delta`` are labelled +1.  In 1D the interface collects
    the linearly interpolated crossings; in 2D it is a set of marching
    segments, one or two per sign-changing cell.  A field that never crosses
    the level yields an empty interface rather than an error.
    """
    ctx = u.ctx
    vals = u.values - delta
    pos = vals >= 0.0
    label = np.where(pos, 1.0, -1.0)
    t = u.tail
    if t.kind == "const":
        tail = TailModel.const(1.0 if t.value >= delta else -1.0)
    else:
        tail = TailModel.split(
            t.pivot,
            1.0 if t.left >= delta else -1.0,
            1.0 if t.right >= delta else -1.0,
            axis=t.axis,
        )
    if ctx.n == 1:
        x = ctx.axis_coords
        flip = pos[:-1] != pos[1:]
        idx = np.nonzero(flip)[0]
        cross = x[idx] + ctx.h * vals[idx] / (vals[idx] - vals[idx + 1])
        return PhaseSet(ctx, label, tail, np.sort(cross))
    segs = _marching_segments(ctx, vals, pos)
    return PhaseSet(ctx, label, tail, segs)


def _edge_point(ctx, vals, i0, j0, i1, j1):
    ax = ctx.axis_coords
    a, b = vals[i0, j0], vals[i1, j1]
    t = a / (a - b)
    return (ax[i0] + t * (ax[i1] - ax[i0]), ax[j0] + t * (ax[j1] - ax[j0]))


def _marching_segments(ctx, vals, pos):
    segs = []
    b00 = pos[:-1, :-1]
    b10 = pos[1:, :-1]
    b01 = pos[:-1, 1:]
    b11 = pos[1:, 1:]
    mixed = ~((b00 == b10) & (b00 == b01) & (b00 == b11))
    for i, j in zip(*np.nonzero(mixed)):
        pts = {}
        if pos[i, j] != pos[i + 1, j]:
            pts["B"] = _edge_point(ctx, vals, i, j, i + 1, j)
        if pos[i + 1, j] != pos[i + 1, j + 1]:
            pts["R"] = _edge_point(ctx, vals, i + 1, j, i + 1, j + 1)
        if pos[i, j + 1] != pos[i + 1, j + 1]:
            pts["T"] = _edge_point(ctx, vals, i, j + 1, i + 1, j + 1)
        if pos[i, j] != pos[i, j + 1]:
            pts["L"] = _edge_point(ctx, vals, i, j, i, j + 1)
        keys = sorted(pts)
        if len(keys) == 2:
            segs.append((pts[keys[0]], pts[keys[1]]))
        elif len(keys) == 4:
            # saddle cell: decide the diagonal by the cell-average sign
            center_pos = (vals[i, j] + vals[i + 1, j] + vals[i, j + 1] + vals[i + 1, j + 1]) >= 0.0
            if pos[i, j] == center_pos:
                segs.append((pts["B"], pts["R"]))
                segs.append((pts["T"], pts["L"]))
            else:
                segs.append((pts["B"], pts["L"]))
                segs.append((pts["T"], pts["R"]))
    if not segs:
        return np.zeros((0, 2, 2))
    return np.array(segs)


def interface_points(ps: PhaseSet) -> np.ndarray:
    """Sample points on the interface (crossings in 1D, endpoints+midpoints in 2D)."""
    if ps.ctx.n == 1:
        return np.asarray(ps.interface, dtype=float).reshape(-1, 1)
    segs = np.asarray(ps.interface)
    if segs.size == 0:
        return np.zeros((0, 2))
    mids = 0.5 * (segs[:, 0, :] + segs[:, 1, :])
    return np.concatenate([segs[:, 0, :], segs[:, 1, :], mids], axis=0)


def hausdorff_gap(points_a: np.ndarray, points_b: np.ndarray) -> tuple:
    """Both one-sided Hausdorff gaps (sup_a dist(a,B), sup_b dist(b,A))."""
    a = np.atleast_2d(np.asarray(points_a, dtype=float))
    b = np.atleast_2d(np.asarray(points_b, dtype=float))
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("point sets live in different dimensions")
    if a.size == 0 or b.size == 0:
        raise ValueError("hausdorff_gap of an empty point set")
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(d.min(axis=1).max()), float(d.min(axis=0).max())


# ---------------------------------------------------------------------------
# perimeter


def _as_region_mask(ctx: FracContext, region) -> np.ndarray | None:
    if region is None:
        return None
    if isinstance(region, Domain):
        return region.omega_mask
    mask = np.asarray(region)
    if mask.dtype != bool or mask.shape != ctx.shape:
        raise ValueError("region must be a boolean node mask matching the grid")
    return mask


def _reduce(parts, compensated: bool) -> float:
    if compensated:
        return math.fsum(float(x) for arr in parts for x in np.ravel(arr))
    return float(sum(np.sum(arr) for arr in parts))


def perimeter(op: FracOperator, ps: PhaseSet, region=None, compensated: bool = False) -> float:
    """Fractional perimeter of the phase set, optionally localized to a region.

    Args:
        op: operator carrying the pair-weight table for ``ps.ctx``.
        ps: two-phase configuration.
        region: ``None`` for the whole space (requires a single-sign tail),
            a boolean node mask, or a :class:`Domain`.
        compensated: accumulate with ``math.fsum`` for bit-stable output.

    Returns:
        The kernel-only perimeter (no ``c_{n,s}`` factor).
    """
    if op.ctx is not ps.ctx and op.ctx != ps.ctx:
        raise ValueError("operator and phase set use different grid contexts")
    reg = _as_region_mask(ps.ctx, region)
    tail_regions = list(ps.tail.regions())
    if reg is None and len(set(tail_regions)) > 1:
        raise ValueError("global perimeter diverges for a mixed-sign tail; pass a region")
    inside = ps.label > 0
    outside = ~inside
    conv_out = op._convolve(outside.astype(float))
    if reg is None:
        parts = [conv_out[inside]]
        middle = []
    else:
        parts = [conv_out[inside & reg]]
        sel = inside & ~reg
        if np.any(sel):
            conv_out_reg = op._convolve((outside & reg).astype(float))
            middle = [conv_out_reg[sel]]
        else:
            middle = []
    weights = op.tail_weights(ps.tail)
    reg_or_all = np.ones(ps.ctx.shape, dtype=bool) if reg is None else reg
    tails = []
    for w, t in zip(weights, tail_regions):
        if t < 0:
            tails.append(w[inside & reg_or_all])
        else:
            tails.append(w[outside & reg_or_all])
    return _reduce(parts + middle + tails, compensated)


def partition_perimeter(op: FracOperator, part: Partition, region=None,
                        compensated: bool = False) -> float:
    """Weighted multiphase perimeter sum(i<j) (a_i-a_j)^2 I_region(E_i, E_j).

    The directed interaction I uses the same three-term localization as
    :func:`perimeter`; for two wells at -1 and +1 the sum collapses to four
    times the two-phase perimeter, exactly, because every array entering the
    reduction comes from the shared table.
    """
    reg = _as_region_mask(part.ctx, region)
    if reg is None and len(set(part.tail.regions())) > 1:
        raise ValueError("global partition perimeter diverges for a mixed tail; pass a region")
    wells = part.wells
    masks = {a: part.phase_mask(a) for a in wells}
    convs = {a: op._convolve(masks[a].astype(float)) for a in wells}
    weights = op.tail_weights(part.tail)
    tail_vals = list(part.tail.regions())
    reg_or_all = np.ones(part.ctx.shape, dtype=bool) if reg is None else reg
    conv_reg = {}
    parts = []
    for a in wells:
        for b in wells:
            if a == b:
                continue
            coef = 0.5 * (a - b) ** 2
            parts.append(coef * convs[b][masks[a] & reg_or_all])
            if reg is not None:
                sel = masks[a] & ~reg
                if np.any(sel):
                    if b not in conv_reg:
                        conv_reg[b] = op._convolve((masks[b] & reg).astype(float))
                    parts.append(coef * conv_reg[b][sel])
            for w, t in zip(weights, tail_vals):
                if t == b:
                    parts.append(coef * w[masks[a] & reg_or_all])
                if t == a:
                    parts.append(coef * w[masks[b] & reg_or_all])
    return _reduce(parts, compensated)


# -- exact 1D interval calculus ---------------------------------------------


def interval_perimeter(s: float, a: float, b: float) -> float:
    """Closed-form global perimeter of a single interval of length L = b - a."""
    length = b - a
    if length <= 0:
        raise ValueError("empty interval")
    return length ** (1.0 - 2.0 * s) / (s * (1.0 - 2.0 * s))


def interval_union_perimeter(s: float, breaks, labels, region=None) -> float:
    """Exact localized perimeter of a piecewise-constant +-1 field on the line.

    ``breaks`` are the ordered jump points and ``labels`` the piece values on
    (-inf, b_0), (b_0, b_1), ..., (b_last, +inf).  ``region`` is an interval
    (lo, hi) or None.  This is the continuum oracle used to cross-check both
    the grid perimeter and the first-variation flow.
    """
    breaks = [float(x) for x in breaks]
    if any(x >= y for x, y in zip(breaks, breaks[1:])):
        raise ValueError("breaks must be strictly increasing")
    labels = [float(v) for v in labels]
    if len(labels) != len(breaks) + 1:
        raise ValueError("need one label per piece")
    edges = [-math.inf] + breaks + [math.inf]
    if region is not None:
        lo, hi = float(region[0]), float(region[1])
        if not lo < hi:
            raise ValueError("region must be a nonempty interval")
    pieces = []  # (a, b, label, in_region)
    for (a, b), lab in zip(zip(edges, edges[1:]), labels):
        if region is None:
            pieces.append((a, b, lab, True))
            continue
        cuts = [a] + [c for c in (lo, hi) if a < c < b] + [b]
        for p, q in zip(cuts, cuts[1:]):
            mid_in = (p >= lo and q <= hi)
            pieces.append((p, q, lab, mid_in))
    if region is None and labels[0] != labels[-1]:
        raise ValueError("global perimeter diverges when both phases are unbounded")
    total = 0.0
    for (a1, b1, l1, r1) in pieces:
        if l1 < 0:
            continue
        for (a2, b2, l2, r2) in pieces:
            if l2 > 0:
                continue
            if not (r1 or r2):
                continue
            if a1 <= a2:
                total += interval_pair_integral(s, a1, b1, a2, b2)
            else:
                total += interval_pair_integral(s, a2, b2, a1, b1)
    return total


def _interval_decomposition(ps: PhaseSet):
    """Jump points and piece labels of a 1D phase set, tails included."""
    ctx = ps.ctx
    breaks = [float(x) for x in np.sort(np.asarray(ps.interface, dtype=float).ravel())]
    left_node = float(ps.label.flat[0])
    labels = [left_node * (-1.0) ** k for k in range(len(breaks) + 1)]
    t = ps.tail
    tail_left = t.value if t.kind == "const" else t.left
    tail_right = t.value if t.kind == "const" else t.right
    if tail_left != labels[0]:
        breaks.insert(0, -ctx.box_edge)
        labels.insert(0, tail_left)
    if tail_right != labels[-1]:
        breaks.append(ctx.box_edge)
        labels.append(tail_right)
    return breaks, labels


def curvature_at(ps: PhaseSet, x, core_radius: float | None = None) -> float:
    """Nonlocal mean curvature of the phase boundary at an interface point.

    Positive when E is locally convex (an interval endpoint gives
    ``L**(-2s)/s``), zero for a flat boundary.  The value carries no kernel
    normalization; multiply by ``c_{n,s}`` to compare with a source term.

    In 1D the probe is snapped to the nearest recorded crossing and the
    principal value is evaluated in closed form; a probe farther than one
    cell from any crossing is rejected.  In 2D the probe is snapped to the
    half-node lattice, the core disc of radius ``core_radius`` (default 4h)
    is dropped as a local half plane, and the remainder is a direct cell sum
    plus closed-form tails.
    """
    ctx = ps.ctx
    if not ps.has_interface:
        raise ValueError("phase set has no interface")
    s = ctx.s
    if ctx.n == 1:
        x = float(np.asarray(x).ravel()[0])
        breaks, labels = _interval_decomposition(ps)
        k = int(np.argmin([abs(x - b) for b in breaks]))
        if abs(x - breaks[k]) > ctx.h:
            raise ValueError(f"probe {x} is more than one cell from the interface")
        x0 = breaks[k]
        total = 0.0
        edges = [-math.inf] + breaks + [math.inf]
        for (a, b), lab in zip(zip(edges, edges[1:]), labels):
            if b <= x0:
                d0, d1 = x0 - b, x0 - a
            elif a >= x0:
                d0, d1 = a - x0, b - x0
            else:
                raise ValueError("probe inside a constant piece")
            if d0 == 0.0:
                # adjacent piece: the delta-ball terms of the two sides cancel
                total += 0.0 if math.isinf(d1) else lab * ray_integral(s, d1)
            else:
                total -= lab * segment_integral(s, d0, d1)
        return total
    return _curvature_2d(ps, x, core_radius)


def _curvature_2d(ps: PhaseSet, x, core_radius: float | None) -> float:
    ctx = ps.ctx
    s, h = ctx.s, ctx.h
    rho = 4.0 * h if core_radius is None else float(core_radius)
    x = np.asarray(x, dtype=float).ravel()
    ax = ctx.axis_coords
    # snap to the half-node lattice so symmetric configurations cancel exactly
    p1 = ax[0] + 0.5 * h * round((x[0] - ax[0]) / (0.5 * h))
    p2 = ax[0] + 0.5 * h * round((x[1] - ax[0]) / (0.5 * h))
    pts = interface_points(ps)
    if np.min(np.hypot(pts[:, 0] - p1, pts[:, 1] - p2)) > 1.5 * h:
        raise ValueError("probe is more than one cell from the interface")
    d2 = (ax[:, None] - p1) ** 2 + (ax[None, :] - p2) ** 2
    with np.errstate(divide="ignore"):
        w = np.where(d2 > rho * rho, d2 ** (-(1.0 + s)), 0.0)
    total = -float(np.sum(ps.label * w)) * ctx.cell_volume
    edge = ctx.box_edge
    t = ps.tail
    if t.kind == "const":
        total -= t.value * box_tail_2d(s, edge, p1, p2)
    else:
        below, above = box_tail_split_2d(s, edge, p1, p2, t.axis, t.pivot)
        total -= t.left * below + t.right * above
    return total


def curvature_residual(ps: PhaseSet, f: GridFunction | None = None) -> float:
    """Sup over interface samples of |c_{n,s} * H - f| (f looked up at nodes)."""
    ctx = ps.ctx
    pts = interface_points(ps)
    if pts.shape[0] == 0:
        raise ValueError("phase set has no interface")
    worst = 0.0
    for p in pts:
        hcur = ctx.c_ns * curvature_at(ps, p)
        fval = 0.0
        if f is not None:
            idx = tuple(int(round((p[ax] - ctx.axis_coords[0]) / ctx.h)) for ax in range(ctx.n))
            fval = float(f.values[idx])
        worst = max(worst, abs(hcur - fval))
    return worst


# ---------------------------------------------------------------------------
# first variation


def _segment_normals(ps: PhaseSet):
    """Midpoints, outward normals, and lengths of the 2D interface segments."""
    ctx = ps.ctx
    segs = np.asarray(ps.interface)
    mids = 0.5 * (segs[:, 0, :] + segs[:, 1, :])
    tang = segs[:, 1, :] - segs[:, 0, :]
    lengths = np.linalg.norm(tang, axis=1)
    normals = np.stack([tang[:, 1], -tang[:, 0]], axis=1)
    normals /= np.maximum(lengths, 1e-300)[:, None]
    ax = ctx.axis_coords
    for k in range(len(segs)):
        probe = mids[k] + 0.6 * ctx.h * normals[k]
        i = int(np.clip(round((probe[0] - ax[0]) / ctx.h), 0, ax.size - 1))
        j = int(np.clip(round((probe[1] - ax[0]) / ctx.h), 0, ax.size - 1))
        if ps.label[i, j] > 0:  # normal should point out of E
            normals[k] = -normals[k]
    return mids, normals, lengths


def first_variation(ps: PhaseSet, vector_field, domain: Domain | None = None) -> float:
    """Surface form of the perimeter variation: sum of H * (X . nu) over the interface.

    ``vector_field`` maps a point to a displacement (scalar in 1D).  When a
    domain is supplied the field must vanish on its boundary ring, matching
    the localization convention of the finite-difference flow check.
    """
    ctx = ps.ctx
    if not ps.has_interface:
        return 0.0
    if domain is not None and len(domain.boundary_nodes):
        for flat in np.asarray(domain.boundary_nodes).ravel()[:64]:
            idx = np.unravel_index(int(flat), ctx.shape)
            p = [ctx.axis_coords[i] for i in idx]
            val = np.asarray(vector_field(p if ctx.n > 1 else p[0]), dtype=float)
            if np.max(np.abs(val)) > 1e-12:
                raise ValueError("vector field must vanish near the domain boundary")
    if ctx.n == 1:
        breaks, labels = _interval_decomposition(ps)
        total = 0.0
        for k, b in enumerate(breaks):
            if not -ctx.box_edge < b < ctx.box_edge:
                continue  # tail-induced jumps at the box edge are not movable
            nu = 1.0 if labels[k] > 0 else -1.0  # outward from E
            total += curvature_at(ps, b) * nu * float(vector_field(b))
        return total
    mids, normals, lengths = _segment_normals(ps)
    total = 0.0
    for m, nu, ell in zip(mids, normals, lengths):
        xval = np.asarray(vector_field(m), dtype=float)
        total += curvature_at(ps, m) * float(xval @ nu) * ell
    return total


def first_variation_fd(ps: PhaseSet, vector_field, t: float, region=None) -> float:
    """Centered flow difference (P(phi_t E) - P(phi_-t E)) / 2t, exact 1D path.

    The deformed sets are re-thresholded interval unions whose perimeter is
    evaluated by the continuum closed form, so the only error in comparing
    with :func:`first_variation` is the O(t^2) of the difference quotient.
    """
    ctx = ps.ctx
    if ctx.n != 1:
        raise ValueError("the exact flow oracle is one-dimensional")
    breaks, labels = _interval_decomposition(ps)
    def moved(sign):
        out = []
        for b in breaks:
            if -ctx.box_edge < b < ctx.box_edge:
                out.append(b + sign * t * float(vector_field(b)))
            else:
                out.append(b)
        if any(x >= y for x, y in zip(out, out[1:])):
            raise ValueError("flow step collapses two interface points")
        return out
    p_plus = interval_union_perimeter(ctx.s, moved(+1.0), labels, region)
    p_minus = interval_union_perimeter(ctx.s, moved(-1.0), labels, region)
    return (p_plus - p_minus) / (2.0 * t)
