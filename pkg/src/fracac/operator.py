"""Discrete fractional operator built on the shared cell-pair weight table.

A `FracOperator` holds, for one grid context, the table of exact cell-pair
kernel integrals and the closed-form tail weights.  Every quadratic object in
the package (pointwise operator, bilinear pairing, localized energy, and the
perimeter sums in `geometry`) is assembled from this one table, so discrete
identities (gradient of energy, energy/perimeter reduction, pairing vs
pointwise-apply duality) hold to roundoff instead of only to quadrature error.

Scaling conventions, with c the kernel normalization and vol = h^n:

    apply(u)_i   = (c / vol) * [ sum_j V(i,j) (u_i - u_j) + tail_i(u) ]
    pairing(u,v) = (c / 2) * [ sum_{ij} V(i,j)(u_i-u_j)(v_i-v_j) + 2 * tails ]
    energy(u; A) = (c/4) S_{A,A} + (c/2) S_{A,box\\A} + (c/2) S_{A,tail}

so that sum_i apply(u)_i * v_i * vol == pairing(u, v) exactly whenever v has a
zero tail, and energy(u; box) == pairing(u, u) / 2.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from . import kernels
from .grid import Domain, FracContext, GridFunction, TailModel

_DIRECT_CONV_MAX = 2048


def _tail_key(tail: TailModel) -> tuple:
    if tail.kind == "const":
        return ("const",)
    return ("split", tail.axis, round(tail.pivot, 14))


class FracOperator:
    """Discrete operator with symbol-normalized scaling on one grid context."""

    def __init__(self, ctx: FracContext):
        self.ctx = ctx
        m_max = ctx.nodes_per_axis - 1
        if ctx.n == 1:
            self.table = kernels.pair_weights_1d(ctx.s, ctx.h, m_max)
        else:
            self.table = kernels.pair_weights_2d(ctx.s, ctx.h, m_max)
        self._kernel_full = self._mirror_table()
        self._row_sum = self._convolve(np.ones(ctx.shape))
        self._tail_cache: dict[tuple, list[np.ndarray]] = {}

    # -- table plumbing ----------------------------------------------------

    def _mirror_table(self) -> np.ndarray:
        m = self.ctx.nodes_per_axis
        if self.ctx.n == 1:
            idx = np.abs(np.arange(2 * m - 1) - (m - 1))
            return self.table[idx]
        idx = np.abs(np.arange(2 * m - 1) - (m - 1))
        return self.table[np.ix_(idx, idx)]

    def _convolve(self, arr: np.ndarray) -> np.ndarray:
        """(V * arr)_i = sum_j V(|i-j|) arr_j over all box nodes."""
        if self.ctx.n == 1:
            if self.ctx.nodes_per_axis <= _DIRECT_CONV_MAX:
                return np.convolve(arr, self._kernel_full, mode="valid")
            return signal.fftconvolve(arr, self._kernel_full, mode="valid")
        return signal.fftconvolve(arr, self._kernel_full, mode="valid")

    # -- tail weights --------------------------------------------------------

    def tail_weights(self, tail: TailModel) -> list[np.ndarray]:
        """Per-node kernel mass of each exterior region of the tail model.

        Returns one array per region (matching `tail.regions()` order), with
        the cell-integrated (1D) or cell-volume-scaled (2D) normalization that
        matches the pair table.
        """
        key = _tail_key(tail)
        cached = self._tail_cache.get(key)
        if cached is not None:
            return cached
        ctx = self.ctx
        edge = ctx.box_edge
        if ctx.n == 1:
            x = ctx.axis_coords
            left = kernels.tail_weight_1d(ctx.s, ctx.h, edge + x)
            right = kernels.tail_weight_1d(ctx.s, ctx.h, edge - x)
            if tail.kind == "const":
                out = [left + right]
            else:
                out = [left, right] if tail.axis == 0 else [left + right]
        else:
            x1, x2 = ctx.coords()
            if tail.kind == "const":
                out = [ctx.cell_volume * _box_tail_grid(ctx.s, edge, x1, x2)]
            else:
                below, above = _box_tail_split_grid(
                    ctx.s, edge, x1, x2, tail.axis, tail.pivot)
                out = [ctx.cell_volume * below, ctx.cell_volume * above]
        self._tail_cache[key] = out
        return out

    def _tail_linear(self, u: GridFunction) -> np.ndarray:
        """sum_r W_r(i) * (u_i - t_r), the tail part of the raw apply."""
        if u.tail is None:
            raise ValueError("operator needs a tail model on the input field")
        weights = self.tail_weights(u.tail)
        vals = u.tail.regions()
        out = np.zeros(self.ctx.shape)
        for w, t in zip(weights, vals):
            out += w * (u.values - t)
        return out

    # -- core entry points ---------------------------------------------------

    def apply_raw(self, u: GridFunction) -> np.ndarray:
        """sum_j V(i,j)(u_i - u_j) + tail, without the c/vol scaling."""
        conv = self._convolve(u.values)
        return u.values * self._row_sum - conv + self._tail_linear(u)

    def apply_all(self, u: GridFunction, domain: Domain | None = None) -> GridFunction:
        """Operator values at every box node; with a domain, exterior nodes are
        zeroed and flagged invalid (the equation only holds inside)."""
        scale = self.ctx.c_ns / self.ctx.cell_volume
        vals = scale * self.apply_raw(u)
        mask = None
        if domain is not None:
            mask = domain.omega_mask.copy()
            vals = np.where(mask, vals, 0.0)
        return GridFunction(self.ctx, vals, tail=None, valid_mask=mask)

    def apply_pointwise(self, u: GridFunction, where) -> float:
        """Operator value at a single node (flat index, index tuple, or
        coordinates snapped to the nearest node)."""
        ctx = self.ctx
        idx = self._resolve_node(where)
        if ctx.n == 1:
            i = idx[0]
            offs = np.abs(np.arange(ctx.nodes_per_axis) - i)
            row = self.table[offs]
            raw = float(np.dot(row, u.values[i] - u.values))
        else:
            i, j = idx
            p = np.abs(np.arange(ctx.nodes_per_axis) - i)
            q = np.abs(np.arange(ctx.nodes_per_axis) - j)
            row = self.table[np.ix_(p, q)]
            raw = float(np.sum(row * (u.values[i, j] - u.values)))
        if u.tail is None:
            raise ValueError("operator needs a tail model on the input field")
        weights = self.tail_weights(u.tail)
        for w, t in zip(weights, u.tail.regions()):
            raw += float(w[idx]) * (u.values[idx] - t)
        return ctx.c_ns / ctx.cell_volume * raw

    def pairing(self, u: GridFunction, v: GridFunction) -> float:
        """Bilinear kernel form <u, v>; the exterior-x-exterior block is only
        included when it vanishes, so v (or u) must have a zero tail."""
        u_zero = u.tail is None or u.tail.is_zero()
        v_zero = v.tail is None or v.tail.is_zero()
        if not (u_zero or v_zero):
            raise ValueError("pairing requires a zero tail on at least one side")
        uu, vv = u.values, v.values
        cross = float(np.sum(uu * vv * self._row_sum) - np.sum(uu * self._convolve(vv)))
        tail = 0.0
        if not u_zero:
            tail = float(np.sum(self._tail_linear(u) * vv))
        elif not v_zero:
            tail = float(np.sum(self._tail_linear(v) * uu))
        elif u.tail is not None and v.tail is not None:
            tail = float(np.sum(self._tail_linear(u) * vv))
        return self.ctx.c_ns * (cross + tail)

    def sobolev_energy(self, u: GridFunction, region: np.ndarray | None = None) -> float:
        """Localized kernel energy: all interactions touching `region`
        (a boolean node mask; default the whole box)."""
        ctx = self.ctx
        if u.tail is None:
            raise ValueError("energy needs a tail model on the input field")
        if region is None:
            region = np.ones(ctx.shape, dtype=bool)
        uu = u.values
        u_in = np.where(region, uu, 0.0)
        ones_in = region.astype(float)
        conv_in = self._convolve(u_in)
        rows_in = self._convolve(ones_in)
        s_in = 2.0 * (float(np.sum(u_in * u_in * rows_in)) - float(np.sum(u_in * conv_in)))
        if region.all():
            s_out = 0.0
        else:
            out = ~region
            u_out = np.where(out, uu, 0.0)
            ones_out = out.astype(float)
            rows_out = self._convolve(ones_out)
            conv_out = self._convolve(u_out)
            conv_out_sq = self._convolve(u_out * u_out)
            s_out = float(np.sum(
                np.where(region, uu * uu * rows_out - 2.0 * uu * conv_out + conv_out_sq, 0.0)))
        weights = self.tail_weights(u.tail)
        s_tail = 0.0
        for w, t in zip(weights, u.tail.regions()):
            d = uu - t
            s_tail += float(np.sum(np.where(region, w * d * d, 0.0)))
        return ctx.c_ns * (0.25 * s_in + 0.5 * s_out + 0.5 * s_tail)

    # -- small-problem extras ------------------------------------------------

    def interaction_matrix(self, domain: Domain, tail: TailModel):
        """Dense affine form of the operator on the interior nodes:
        apply(u)|_omega = A @ u_omega + b(exterior values, tail).

        Only for modest interiors (dense); used by stability checks and the
        discrete comparison-principle certificate.  A is an M-matrix: positive
        diagonal, nonpositive off-diagonal, nonnegative row sums.
        """
        ctx = self.ctx
        omega = np.flatnonzero(domain.omega_mask.ravel())
        n_in = omega.size
        if n_in * n_in > 3.0e7:
            raise ValueError("interior too large for a dense interaction matrix")
        scale = ctx.c_ns / ctx.cell_volume
        if ctx.n == 1:
            pos = omega
            off = np.abs(pos[:, None] - pos[None, :])
            v_sub = self.table[off]
        else:
            m = ctx.nodes_per_axis
            pi, pj = np.divmod(omega, m)
            v_sub = self.table[np.abs(pi[:, None] - pi[None, :]),
                               np.abs(pj[:, None] - pj[None, :])]
        row_sum = self._row_sum.ravel()[omega]
        tail_tot = np.zeros(n_in)
        for w in self.tail_weights(tail):
            tail_tot += w.ravel()[omega]
        a = -v_sub
        np.fill_diagonal(a, row_sum + tail_tot)
        return scale * a, omega

    def stencil_dump(self, count: int = 8) -> dict:
        """Small JSON-friendly view of the weight table and one tail row."""
        ctx = self.ctx
        out: dict = {"n": ctx.n, "s": ctx.s, "h": ctx.h,
                     "normalization": ctx.c_ns}
        if ctx.n == 1:
            out["pair_weights"] = self.table[: count + 1].tolist()
            w = self.tail_weights(TailModel.const(0.0))[0]
            out["tail_weight_center"] = float(w[ctx.nodes_per_axis // 2])
        else:
            k = min(count, ctx.nodes_per_axis - 1)
            out["pair_weights"] = self.table[: k + 1, : k + 1].tolist()
            w = self.tail_weights(TailModel.const(0.0))[0]
            mid = ctx.nodes_per_axis // 2
            out["tail_weight_center"] = float(w[mid, mid])
        return out

    # -- helpers ---------------------------------------------------------

    def _resolve_node(self, where) -> tuple:
        ctx = self.ctx
        if isinstance(where, (int, np.integer)):
            return np.unravel_index(int(where), ctx.shape)
        where = np.asarray(where)
        if where.dtype.kind in "iu" and where.shape == (ctx.n,):
            return tuple(int(w) for w in where)
        if where.shape == () and ctx.n == 1:
            coords = np.array([float(where)])
        else:
            coords = where.astype(float).reshape(ctx.n)
        idx = np.rint((coords + ctx.box_edge - 0.5 * ctx.h) / ctx.h).astype(int)
        idx = np.clip(idx, 0, ctx.nodes_per_axis - 1)
        return tuple(int(i) for i in idx)


# ---------------------------------------------------------------------------
# vectorized 2D tail assembly (all distances positive: nodes are interior)

def _cos_full(s: float) -> float:
    return float(kernels.cos_power_integral(s, 0.5 * np.pi))


def _quadrant_pos(s: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """quadrant_integral for strictly positive array arguments."""
    c_full = _cos_full(s)
    theta = np.arctan2(b, a)
    ca = kernels.cos_power_integral(s, theta)
    cb = kernels.cos_power_integral(s, 0.5 * np.pi - theta)
    return (b ** (-2.0 * s) * (c_full - cb) + a ** (-2.0 * s) * (c_full - ca)) / (2.0 * s)


def _quadrant_any(s: float, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """quadrant_integral with `a` of any sign (b > 0 required), vectorized."""
    c_full = _cos_full(s)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    edge_val = b ** (-2.0 * s) * c_full / (2.0 * s)  # a == 0
    a_safe = np.where(a == 0.0, 1.0, np.abs(a))
    pos = _quadrant_pos(s, a_safe, b)
    out = np.where(a > 0.0, pos, 2.0 * edge_val - pos)
    return np.where(a == 0.0, edge_val, out)


def _halfplane_grid(s: float, a: np.ndarray) -> np.ndarray:
    return a ** (-2.0 * s) * 2.0 * _cos_full(s) / (2.0 * s)


def _box_tail_grid(s: float, edge: float, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    ar, al = edge - x1, edge + x1
    at, ab = edge - x2, edge + x2
    total = (_halfplane_grid(s, ar) + _halfplane_grid(s, al)
             + _halfplane_grid(s, at) + _halfplane_grid(s, ab))
    total -= (_quadrant_pos(s, ar, at) + _quadrant_pos(s, ar, ab)
              + _quadrant_pos(s, al, at) + _quadrant_pos(s, al, ab))
    return total


def _box_tail_split_grid(s: float, edge: float, x1: np.ndarray, x2: np.ndarray,
                         axis: int, pivot: float):
    if axis == 1:
        x1, x2 = x2, x1
    ar, al = edge - x1, edge + x1
    at, ab = edge - x2, edge + x2
    c = pivot - x1
    above = (_halfplane_grid(s, ar)
             - _quadrant_pos(s, ar, at) - _quadrant_pos(s, ar, ab)
             + _quadrant_any(s, c, at) + _quadrant_any(s, c, ab))
    below = _box_tail_grid(s, edge, x1, x2) - above
    return below, above
