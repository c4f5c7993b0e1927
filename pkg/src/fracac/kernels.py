"""Exact and near-exact quadrature of the kernel |z|^(-n-2s) against grid cells.

Everything in this package that touches the kernel goes through one shared
family of weights: the double integral of the kernel over two node-centered
cells.  Writing z = x - y, that double integral collapses to a single integral
of the kernel against the correlation of two cells, a tensor product of
triangle (hat) profiles:

    V(offset) = int  prod_d (h - |z_d - offset_d * h|)_+  |z|^(-n-2s) dz.

In 1D this has a closed form: a second difference of t -> t^(1-2s).  In 2D the
patches touching the kernel singularity have closed forms in polar
coordinates, the rest is done by an adaptive tensor Gauss rule.

Sharing a single table between the pointwise operator, the bilinear pairing,
the Sobolev-type energy and the perimeter sums is what makes the discrete
gradient exactly match the discrete energy and keeps the energy/perimeter
identity exact at roundoff; the price is that the operator's pointwise
consistency is O(h^(2-2s)), which the fine-grid oracle tests account for.

Tail corrections (integrals over |z| beyond the cell tiling) are closed form:
powers in 1D, combinations of quadrant integrals reducible to the regularized
incomplete beta function in 2D.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import betainc

# ---------------------------------------------------------------------------
# 1D

def pair_weights_1d(s: float, h: float, m_max: int) -> np.ndarray:
    """V[m] = exact kernel double integral over two cells m nodes apart.

    V[0] = 0 by convention: same-cell pairs never contribute, every quadratic
    form using the table carries a (u_i - u_j)^2 or label-difference factor.
    """
    a = 2.0 * s
    m = np.arange(m_max + 2, dtype=float)
    phi = m ** (1.0 - a)
    v = np.empty(m_max + 1)
    v[0] = 0.0
    # 2*phi[m] - phi[m-1] - phi[m+1] >= 0 since phi is concave
    v[1:] = (2.0 * phi[1:m_max + 1] - phi[0:m_max] - phi[2:m_max + 2])
    v[1:] *= h ** (1.0 - a) / (a * (1.0 - a))
    return v


def tail_weight_1d(s: float, h: float, d) -> np.ndarray:
    """Cell-averaged one-sided tail coefficient for a node at distance d from
    the cell-tiling edge (d >= h/2): int_cell int_{tail side} kernel."""
    a = 2.0 * s
    d = np.asarray(d, dtype=float)
    inner = np.maximum(d - 0.5 * h, 0.0)  # edge node: d == h/2 up to roundoff
    return ((d + 0.5 * h) ** (1.0 - a) - inner ** (1.0 - a)) / (a * (1.0 - a))


def ray_integral(s: float, d: float) -> float:
    """int_d^inf t^(-1-2s) dt = d^(-2s) / (2s)."""
    return d ** (-2.0 * s) / (2.0 * s)


def segment_integral(s: float, d0: float, d1: float) -> float:
    """Kernel integral over one side at distances [d0, d1], 0 < d0 <= d1 <= inf."""
    a = 2.0 * s
    upper = 0.0 if math.isinf(d1) else d1 ** (-a)
    return (d0 ** (-a) - upper) / a


def interval_pair_integral(s: float, a1: float, b1: float, a2: float, b2: float) -> float:
    """Exact int_{a1}^{b1} int_{a2}^{b2} |x-y|^(-1-2s) dy dx for b1 <= a2.

    a1 = -inf and/or b2 = +inf are allowed (the divergent parts cancel in the
    second-difference structure) unless both are infinite, which diverges.
    """
    if b1 > a2 + 1e-15 * max(1.0, abs(a2)):
        raise ValueError("intervals must be ordered and disjoint")
    al = 2.0 * s
    e = 1.0 - al

    def phi(t: float) -> float:
        return t ** e / (al * e)

    left_inf, right_inf = math.isinf(a1), math.isinf(b2)
    if left_inf and right_inf:
        raise ValueError("double integral with both rays infinite diverges")
    if left_inf:
        # lim_{a1->-inf} [phi(a2-a1) - phi(b2-a1)] = 0
        return phi(b2 - b1) - phi(a2 - b1)
    if right_inf:
        return phi(a2 - a1) - phi(a2 - b1)
    return phi(a2 - a1) + phi(b2 - b1) - phi(a2 - b1) - phi(b2 - a1)


def linear_kernel_integral(s: float, a: float, b: float, c0: float, c1: float) -> float:
    """int_a^b (c0 + c1*z) z^(-1-2s) dz for 0 <= a < b, finite when c0 = 0 at a = 0."""
    al = 2.0 * s
    out = c1 * (b ** (1.0 - al) - a ** (1.0 - al)) / (1.0 - al)
    if c0 != 0.0:
        if a == 0.0:
            raise ValueError("constant part diverges at a = 0")
        out += c0 * (a ** (-al) - b ** (-al)) / al
    return out


def pair_weight_1d_subsampled(s: float, h: float, m: int, refine: int) -> float:
    """V[m] assembled from `refine` exact subcell integrals per cell.

    The triangle profile is linear on each subinterval and the kernel is
    integrated in closed form there, so the sum telescopes to the exact weight
    for every refinement level; this is the knob the refinement-stability
    check turns (the quadrature is converged in the s < 1/2 regime).
    """
    if m < 1:
        return 0.0
    total = 0.0
    for half in range(2):  # [mh - h, mh] and [mh, mh + h]
        lo = (m - 1 + half) * h
        for j in range(refine):
            za, zb = lo + j * h / refine, lo + (j + 1) * h / refine
            mid = 0.5 * (za + zb)
            tri_mid = h - abs(mid - m * h)
            slope = 1.0 if half == 0 else -1.0
            c1 = slope
            c0 = tri_mid - slope * mid
            if za == 0.0 and c0 != 0.0:
                # the triangle vanishes at z=0 only in exact arithmetic
                c0 = 0.0
                c1 = tri_mid / mid
            total += linear_kernel_integral(s, za, zb, c0, c1)
    return total


# ---------------------------------------------------------------------------
# 2D closed forms

def cos_power_integral(s: float, theta) -> np.ndarray:
    """C(theta) = int_0^theta cos(t)^(2s) dt for theta in [0, pi/2],
    via the regularized incomplete beta function."""
    theta = np.asarray(theta, dtype=float)
    b_half = math.gamma(0.5) * math.gamma(s + 0.5) / math.gamma(s + 1.0)
    return 0.5 * b_half * betainc(0.5, s + 0.5, np.sin(theta) ** 2)


def halfplane_integral(s: float, a: float) -> float:
    """int_{z1 > a} |z|^(-2-2s) dz over the full z2 line, a > 0."""
    if a <= 0:
        raise ValueError("half-plane distance must be positive")
    c_full = float(cos_power_integral(s, 0.5 * math.pi))
    return a ** (-2.0 * s) * 2.0 * c_full / (2.0 * s)


def quadrant_integral(s: float, a: float, b: float) -> float:
    """int_{z1 > a, z2 > b} |z|^(-2-2s) dz; needs max(a, b) > 0 so the region
    stays away from the singularity.  Negative values are folded by reflection."""
    if a <= 0.0 and b <= 0.0:
        raise ValueError("quadrant region would contain the kernel singularity")
    if a < 0.0:
        return 2.0 * quadrant_integral(s, 0.0, b) - quadrant_integral(s, -a, b)
    if b < 0.0:
        return 2.0 * quadrant_integral(s, a, 0.0) - quadrant_integral(s, a, -b)
    c_full = float(cos_power_integral(s, 0.5 * math.pi))
    if a == 0.0 and b == 0.0:
        raise ValueError("quadrant corner at the origin diverges")
    if a == 0.0:
        return b ** (-2.0 * s) * c_full / (2.0 * s)
    if b == 0.0:
        return a ** (-2.0 * s) * c_full / (2.0 * s)
    theta_c = math.atan2(b, a)
    ca = float(cos_power_integral(s, theta_c))
    cb = float(cos_power_integral(s, 0.5 * math.pi - theta_c))
    return (b ** (-2.0 * s) * (c_full - cb) + a ** (-2.0 * s) * (c_full - ca)) / (2.0 * s)


def box_tail_2d(s: float, edge: float, x1: float, x2: float) -> float:
    """Kernel integral over the complement of the cell tiling [-edge, edge]^2,
    seen from an interior point (x1, x2): inclusion-exclusion of four
    half-planes minus the four corner quadrants."""
    ar, al = edge - x1, edge + x1
    at, ab = edge - x2, edge + x2
    if min(ar, al, at, ab) <= 0:
        raise ValueError("tail integral requires a point strictly inside the box")
    total = sum(halfplane_integral(s, d) for d in (ar, al, at, ab))
    total -= (quadrant_integral(s, ar, at) + quadrant_integral(s, ar, ab)
              + quadrant_integral(s, al, at) + quadrant_integral(s, al, ab))
    return total


def box_tail_split_2d(s: float, edge: float, x1: float, x2: float,
                      axis: int, pivot: float) -> tuple[float, float]:
    """Split the box-complement tail integral at coordinate `pivot` along
    `axis` (pivot strictly inside the box): returns (below, above) parts."""
    if axis == 1:
        x1, x2 = x2, x1
    ar, al = edge - x1, edge + x1
    at, ab = edge - x2, edge + x2
    c = pivot - x1
    if not -al < c < ar:
        raise ValueError("split pivot must lie strictly inside the box")
    above = (halfplane_integral(s, ar)
             - quadrant_integral(s, ar, at) - quadrant_integral(s, ar, ab)
             + quadrant_integral(s, c, at) + quadrant_integral(s, c, ab))
    below = box_tail_2d(s, edge, x1, x2) - above
    return below, above


# ---------------------------------------------------------------------------
# 2D pair-weight table

def _kernel2(z1, z2, s):
    return (z1 * z1 + z2 * z2) ** (-(1.0 + s))


_GAUSS_FAR = np.polynomial.legendre.leggauss(10)
_GAUSS_AD = np.polynomial.legendre.leggauss(7)


def _gauss_rect(f, x0, x1, y0, y1, rule):
    t, w = rule
    xm, xr = 0.5 * (x0 + x1), 0.5 * (x1 - x0)
    ym, yr = 0.5 * (y0 + y1), 0.5 * (y1 - y0)
    gx = xm + xr * t
    gy = ym + yr * t
    vals = f(gx[:, None], gy[None, :])
    return xr * yr * float(w @ vals @ w)


def _adaptive_rect(f, x0, x1, y0, y1, tol, depth=0):
    coarse = _gauss_rect(f, x0, x1, y0, y1, _GAUSS_AD)
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    quads = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
    fine = sum(_gauss_rect(f, *q, _GAUSS_AD) for q in quads)
    err = abs(fine - coarse)
    if err <= tol or depth >= 30:
        return fine
    return sum(_adaptive_rect(f, *q, 0.25 * tol, depth + 1) for q in quads)


def _corner_patch_xy(s: float, h: float) -> float:
    """int_{[0,h]^2} z1 z2 |z|^(-2-2s) dz, exactly (polar coordinates)."""
    return h ** (2.0 - 2.0 * s) * (1.0 - 2.0 ** (-s)) / (2.0 * s * (1.0 - s))


def _corner_patch_x(s: float, h: float) -> float:
    """int_{[0,h]^2} z1 |z|^(-2-2s) dz, exactly."""
    c_quarter = float(cos_power_integral(s, 0.25 * math.pi))
    return h ** (1.0 - 2.0 * s) * (c_quarter + (1.0 - 2.0 ** (-s)) / (2.0 * s)) / (1.0 - 2.0 * s)


def _pair_weight_2d_single(s: float, h: float, p: int, q: int) -> float:
    """One table entry by patchwise integration; singular patches closed form."""
    if p == 0 and q == 0:
        return 0.0
    if p < q:
        p, q = q, p
    k = lambda z1, z2: _kernel2(z1, z2, s)

    def tri_patch(x0, x1, y0, y1, cx, cy):
        f = lambda z1, z2: (h - np.abs(z1 - cx)) * (h - np.abs(z2 - cy)) * k(z1, z2)
        scale = h * h * _kernel2(max(abs(x0), 1e-30), max(abs(y0), 1e-30), s)
        tol = 1e-12 * max(abs(scale) * (x1 - x0) * (y1 - y0), h ** (2.0 - 2.0 * s))
        return _adaptive_rect(f, x0, x1, y0, y1, tol)

    cx, cy = p * h, q * h
    total = 0.0
    if (p, q) == (1, 0):
        # two singular patches mirrored across z2 = 0, two smooth ones
        total += 2.0 * (h * _corner_patch_x(s, h) - _corner_patch_xy(s, h))
        total += tri_patch(h, 2 * h, 0.0, h, cx, cy) + tri_patch(h, 2 * h, -h, 0.0, cx, cy)
        return total
    if (p, q) == (1, 1):
        total += _corner_patch_xy(s, h)
        total += tri_patch(0.0, h, h, 2 * h, cx, cy) + tri_patch(h, 2 * h, 0.0, h, cx, cy)
        total += tri_patch(h, 2 * h, h, 2 * h, cx, cy)
        return total
    for x0 in (cx - h, cx):
        for y0 in (cy - h, cy):
            total += tri_patch(x0, x0 + h, y0, y0 + h, cx, cy)
    return total


@lru_cache(maxsize=8)
def _pair_weights_2d_cached(s: float, h: float, m_max: int) -> np.ndarray:
    tab = np.zeros((m_max + 1, m_max + 1))
    near = 3
    for p in range(0, min(near, m_max) + 1):
        for q in range(0, p + 1):
            val = _pair_weight_2d_single(s, h, p, q)
            tab[p, q] = tab[q, p] = val

    if m_max > near:
        # far offsets: fixed tensor Gauss on the four smooth patches, vectorized
        ps, qs = np.meshgrid(np.arange(m_max + 1), np.arange(m_max + 1), indexing="ij")
        sel = (np.maximum(ps, qs) > near) & (ps >= qs)
        po, qo = ps[sel].astype(float), qs[sel].astype(float)
        t, w = _GAUSS_FAR
        acc = np.zeros(po.shape)
        for dx in (-0.5, 0.5):
            for dy in (-0.5, 0.5):
                # patch centered at offset + (dx, dy)*h, half-width h/2
                gx = (po[:, None] + dx)[..., None] * h + 0.5 * h * t[None, None, :]
                gy = (qo[:, None] + dy)[..., None] * h + 0.5 * h * t[None, None, :]
                z1 = gx[:, 0, :, None]
                z2 = gy[:, 0, None, :]
                tri = ((h - np.abs(z1 - po[:, None, None] * h))
                       * (h - np.abs(z2 - qo[:, None, None] * h)))
                vals = tri * _kernel2(z1, z2, s)
                acc += (0.5 * h) ** 2 * np.einsum("i,nij,j->n", w, vals, w)
        tab[ps[sel], qs[sel]] = acc
        tab[qs[sel], ps[sel]] = acc
    return tab


def pair_weights_2d(s: float, h: float, m_max: int) -> np.ndarray:
    """Table V[p, q] (p, q >= 0) of exact-cell-pair kernel integrals; use with
    absolute offsets, the kernel is even in each coordinate."""
    return _pair_weights_2d_cached(float(s), float(h), int(m_max))
