"""Polynomial multi-well potentials and their structural checks.

A potential here is a polynomial W >= 0 whose zero set is a finite collection
of nondegenerate wells (W = W' = 0, W'' > 0).  Derivatives are taken on the
coefficient vector, so eval_W1/eval_W2 are exact, not finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly


@dataclass(frozen=True)
class Potential:
    kind: str
    coeffs: tuple[float, ...]        # power basis, ascending
    wells: tuple[float, ...]
    p: int                           # growth exponent, = degree for polynomials

    @property
    def d1(self) -> np.ndarray:
        return npoly.polyder(np.asarray(self.coeffs))

    @property
    def d2(self) -> np.ndarray:
        return npoly.polyder(np.asarray(self.coeffs), 2)


def eval_W(pot: Potential, t):
    return npoly.polyval(np.asarray(t, dtype=float), np.asarray(pot.coeffs))


def eval_W1(pot: Potential, t):
    return npoly.polyval(np.asarray(t, dtype=float), pot.d1)


def eval_W2(pot: Potential, t):
    return npoly.polyval(np.asarray(t, dtype=float), pot.d2)


def make_quartic() -> Potential:
    """The standard double well W(t) = (1 - t^2)^2 / 4 with wells at -1, 1."""
    return Potential(kind="quartic", coeffs=(0.25, 0.0, -0.5, 0.0, 0.25), wells=(-1.0, 1.0), p=4)


def make_multiwell(wells) -> Potential:
    """W(t) = prod_j (t - a_j)^2 for at least two distinct well locations."""
    wells = tuple(sorted(float(a) for a in wells))
    if len(wells) < 2:
        raise ValueError("need at least two wells")
    if min(np.diff(wells)) < 1e-12:
        raise ValueError("wells must be distinct")
    coeffs = npoly.polyfromroots(np.repeat(wells, 2))
    if np.max(np.abs(coeffs.imag)) > 1e-12:
        raise ValueError("well product produced complex coefficients")
    return Potential(kind="multiwell", coeffs=tuple(coeffs.real), wells=wells, p=2 * len(wells))


def make_polynomial(coeffs) -> Potential:
    """User-supplied coefficients (ascending).  Wells are detected numerically
    as real critical points with W ~ 0 and W'' > 0."""
    coeffs = tuple(float(c) for c in coeffs)
    deg = len(coeffs) - 1
    while deg > 0 and coeffs[deg] == 0.0:
        deg -= 1
    if deg < 2:
        raise ValueError("potential degree must be at least 2")
    pot = Potential(kind="polynomial", coeffs=coeffs, wells=(), p=deg)
    crit = npoly.polyroots(pot.d1)
    wells = []
    scale = max(abs(c) for c in coeffs)
    for r in crit:
        if abs(r.imag) > 1e-9:
            continue
        t = float(r.real)
        if abs(eval_W(pot, t)) < 1e-9 * max(1.0, scale) and eval_W2(pot, t) > 1e-12:
            wells.append(t)
    wells = tuple(sorted(set(round(w, 12) for w in wells)))
    return Potential(kind="polynomial", coeffs=coeffs, wells=wells, p=deg)


def validate_conditions(pot: Potential, span: float = 3.0, step: float = 1e-3) -> dict:
    """Structural report: nonnegativity, well count and nondegeneracy, and the
    smallest constant C making (1/C)(|t|^(p-1) - 1) <= |W'(t)| <= C(|t|^(p-1) + 1)
    hold on the sampled range.  Never raises; callers inspect `ok`."""
    lo = min([-span] + [w - 1.0 for w in pot.wells])
    hi = max([span] + [w + 1.0 for w in pot.wells])
    t = np.arange(lo, hi + step, step)
    W = eval_W(pot, t)
    W1 = np.abs(eval_W1(pot, t))
    growth = np.abs(t) ** (pot.p - 1)

    checks: dict[str, dict] = {}
    checks["nonnegative"] = {
        "ok": bool(W.min() >= -1e-10),
        "min_W": float(W.min()),
    }
    well_ok = len(pot.wells) >= 2
    details = []
    for a in pot.wells:
        wa, w1a, w2a = float(eval_W(pot, a)), float(eval_W1(pot, a)), float(eval_W2(pot, a))
        good = abs(wa) < 1e-9 and abs(w1a) < 1e-9 and w2a > 1e-12
        well_ok &= good
        details.append({"well": a, "W": wa, "W1": w1a, "W2": w2a, "ok": good})
    checks["wells"] = {"ok": bool(well_ok), "count": len(pot.wells), "details": details}

    c_upper = float(np.max(W1 / (growth + 1.0)))
    need_lower = growth > 1.0
    with np.errstate(divide="ignore"):
        ratios = np.where(need_lower, (growth - 1.0) / np.maximum(W1, 1e-300), 0.0)
    c_lower = float(np.max(ratios))
    c_needed = max(c_upper, c_lower)
    checks["growth_sandwich"] = {
        "ok": bool(np.isfinite(c_needed) and c_needed < 1e6),
        "C": c_needed,
        "sample_range": [float(lo), float(hi)],
    }
    ok = all(c["ok"] for c in checks.values())
    return {"ok": ok, "checks": checks, "p": pot.p, "wells": list(pot.wells)}
