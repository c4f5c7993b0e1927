"""Reconstruction from interior measurement windows.

Given a sweep whose minimizers are sampled on a window V disjoint from the
source support, the stationarity equation rearranges on V into graph samples
of the potential derivative: W'(u_k(x)) = -eps_k^(2s) (-Delta)^s u_k(x).
Polynomial least squares on those samples (optionally constrained to vanish
at known wells) recovers W'; integrating and pinning min-over-wells W = 0
recovers W.  The source is then recovered two ways: the exact rearrangement
of the discrete equation at the sharpest level, and the limit formula that
replaces the operator field by the kernel field of the extracted limit set.
Interface and perimeter reconstructions come from the sharpest level set.

The harness at the bottom compares two complete synthetic datasets: equal
window measurements must yield equal reconstructions; differing ones are
reported with the first distinguishing level and node.

Field continuation from V to the whole space is deliberately absent: it is
exponentially ill-posed, so everything beyond W' recovery runs on the
simulated full fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import linalg, ndimage

from .geometry import box_region, extract_interface, hausdorff_gap, interface_points, perimeter
from .grid import GridFunction, TailModel
from .potentials import Potential, eval_W1, make_polynomial
from .sweep import SweepRecord

_WELL_SNAP = 1e-12


@dataclass
class Measurement:
    """Window records: per-level pairs (u on V, operator field on V)."""

    ctx: object
    s: float
    eps_list: tuple
    V_mask: np.ndarray
    u_V: list
    lap_V: list
    knowledge_flags: dict
    f_support: tuple | None = None

    def __post_init__(self):
        if not self.V_mask.any():
            raise ValueError("measurement window V is empty")
        if len(self.u_V) != len(self.eps_list) or len(self.lap_V) != len(self.eps_list):
            raise ValueError("measurement needs one (u, lap) pair per level")
        for a, b in zip(self.u_V, self.lap_V):
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise ValueError("non-finite measurement values")

    @property
    def n_levels(self) -> int:
        return len(self.eps_list)


def make_measurement(rec: SweepRecord, V: dict | np.ndarray,
                     variant: str = "i") -> Measurement:
    """Record (u, operator field) pairs on V from a finished sweep.

    V is a region descriptor (interval/rect via lo-hi corners) or a boolean
    node mask.  V must sit strictly inside Omega and miss the source support;
    both are checked against the generating plan.
    """
    plan = rec.plan
    ctx = plan.ctx
    if isinstance(V, np.ndarray):
        mask = V.astype(bool)
    else:
        if V.get("type") != "box":
            raise ValueError("V descriptor must be {'type': 'box', 'lo': ..., 'hi': ...}")
        mask = box_region(ctx, V["lo"], V["hi"])
    if not mask.any():
        raise ValueError("measurement window V contains no nodes")
    inner = ndimage.binary_erosion(plan.dom.omega_mask, iterations=1)
    if np.any(mask & ~inner):
        raise ValueError("V must lie strictly inside Omega")
    if plan.f is not None:
        fsup = np.abs(plan.f.values) > 0
        if np.any(mask & fsup):
            raise ValueError("V intersects the source support")
    if variant not in ("i", "ii"):
        raise ValueError("variant must be 'i' or 'ii'")
    flags = {"W_known": variant == "ii", "u_known_on_V": variant == "i"}
    return Measurement(
        ctx=ctx, s=ctx.s, eps_list=plan.eps_list, V_mask=mask,
        u_V=[rep.u.values[mask].copy() for rep in rec.reports],
        lap_V=[lap.values[mask].copy() for lap in rec.laps],
        knowledge_flags=flags, f_support=plan.f_support)


def add_noise(meas: Measurement, amplitude: float, seed: int = 0) -> Measurement:
    """Additive uniform perturbation of both measurement streams."""
    rng = np.random.default_rng(seed)
    pert_u = [u + rng.uniform(-amplitude, amplitude, size=u.shape) for u in meas.u_V]
    pert_l = [l + rng.uniform(-amplitude, amplitude, size=l.shape) for l in meas.lap_V]
    return Measurement(ctx=meas.ctx, s=meas.s, eps_list=meas.eps_list,
                       V_mask=meas.V_mask, u_V=pert_u, lap_V=pert_l,
                       knowledge_flags=dict(meas.knowledge_flags),
                       f_support=meas.f_support)


# ---------------------------------------------------------------------------
# potential recovery


def sample_W1_graph(meas: Measurement) -> dict:
    """All (t, w) = (u_k(x), -eps_k^(2s) lap_k(x)) pairs across levels and V.

    On V the source vanishes, so w = W'(t) for the generating potential.
    Flags degeneracy when every t coincides with a single value to machine
    precision (a uniform-phase window carries no graph information).
    """
    ts, ws = [], []
    for eps, u, lap in zip(meas.eps_list, meas.u_V, meas.lap_V):
        ts.append(np.asarray(u, dtype=float))
        ws.append(-(eps ** (2.0 * meas.s)) * np.asarray(lap, dtype=float))
    t = np.concatenate(ts)
    w = np.concatenate(ws)
    t_min, t_max = float(np.min(t)), float(np.max(t))
    degenerate = (t_max - t_min) <= _WELL_SNAP * max(1.0, abs(t_max))
    return {"t": t, "w": w, "t_min": t_min, "t_max": t_max,
            "spread": t_max - t_min, "degenerate": degenerate, "count": t.size}


def fit_W1(samples: dict, degree: int, well_prior=None) -> dict:
    """Least-squares polynomial through the graph samples.

    ``well_prior`` lists wells where W' vanishes; those constraints are
    imposed exactly by restricting the fit to the nullspace of the well
    Vandermonde rows.  Raises on rank deficiency, carrying the sample range
    (too narrow a window leaves the polynomial underdetermined — this is
    where the underlying determination leans on analyticity).
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    t = np.asarray(samples["t"], dtype=float)
    w = np.asarray(samples["w"], dtype=float)
    if samples.get("degenerate"):
        raise ValueError("degenerate samples: window saw a single value of u")
    A = np.vander(t, degree + 1, increasing=True)
    if well_prior:
        wells = np.asarray(sorted(well_prior), dtype=float)
        C = np.vander(wells, degree + 1, increasing=True)
        N = linalg.null_space(C)
        if N.shape[1] == 0:
            raise ValueError("well prior over-constrains the requested degree")
        B = A @ N
        dof = N.shape[1]
    else:
        B = A
        dof = degree + 1
    if np.linalg.matrix_rank(B) < dof:
        raise ValueError(
            f"rank-deficient fit: samples span t in [{samples['t_min']:.6g}, "
            f"{samples['t_max']:.6g}], too narrow for degree {degree}")
    sol, res, rank, sv = np.linalg.lstsq(B, w, rcond=None)
    coeffs = (N @ sol) if well_prior else sol
    fitted = A @ coeffs
    resid = float(np.sqrt(np.mean((fitted - w) ** 2)))
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    return {"coeffs": tuple(float(c) for c in coeffs), "residual": resid,
            "cond": cond, "constrained": bool(well_prior),
            "t_range": (samples["t_min"], samples["t_max"])}


def potential_from_W1(coeffs, wells=None) -> Potential:
    """Antiderivative of the fitted W', pinned so min over wells of W is 0."""
    c1 = np.asarray(coeffs, dtype=float)
    W = npoly.polyint(c1)
    if wells is None:
        d2 = npoly.polyder(c1)
        wells = tuple(sorted(
            float(r.real) for r in npoly.polyroots(c1)
            if abs(r.imag) < 1e-9 and float(npoly.polyval(r.real, d2)) > 1e-12))
    if not wells:
        raise ValueError("fitted derivative has no wells (no stable minima)")
    vals = [float(npoly.polyval(a, W)) for a in wells]
    W[0] -= min(vals)
    base = make_polynomial(tuple(float(c) for c in W))
    # fitted wells carry fit noise, so the strict W ~ 0 re-detection inside
    # make_polynomial can drop the non-minimal ones; keep the W' roots
    return Potential(kind="polynomial", coeffs=base.coeffs,
                     wells=tuple(round(w, 12) for w in wells), p=base.p)


# ---------------------------------------------------------------------------
# source, interface, perimeter recovery


def relative_l2(ctx, approx: np.ndarray, truth: np.ndarray, mask: np.ndarray) -> float:
    num = float(np.sqrt(np.sum((approx[mask] - truth[mask]) ** 2) * ctx.cell_volume))
    den = float(np.sqrt(np.sum(truth[mask] ** 2) * ctx.cell_volume))
    if den == 0:
        return math.inf if num > 0 else 0.0
    return num / den


def recover_f(rec: SweepRecord, w1_coeffs, k: int | None = None) -> dict:
    """Two source estimates from the sharpest (or chosen) level.

    ``exact``: the discrete rearrangement lap + eps^(-2s) W'(u) — machine
    faithful when W' is the generating one.  ``limit``: the kernel field of
    the extracted limit set in place of the operator field — the asymptotic
    formula, whose gap to ``exact`` measures the finite-eps error.
    """
    plan = rec.plan
    if k is None:
        k = len(rec.eps_list) - 1
    eps = rec.eps_list[k]
    u = rec.reports[k].u
    ieps = eps ** (-2.0 * plan.ctx.s)
    wprime = npoly.polyval(u.values, np.asarray(w1_coeffs, dtype=float))
    exact = rec.laps[k].values + ieps * wprime
    ps = rec.require_limit_set()
    rhs = rec.op.apply_all(ps.indicator_difference(), domain=plan.dom).values
    limit = rhs + ieps * wprime
    gap = float(np.max(np.abs(exact[plan.dom.omega_mask] - limit[plan.dom.omega_mask])))
    mk = lambda v: GridFunction(plan.ctx, v, TailModel.const(0.0),
                                valid_mask=plan.dom.omega_mask)
    return {"f_exact": mk(exact), "f_limit": mk(limit), "k": int(k),
            "eps": eps, "estimator_gap_sup": gap}


def f_error_report(rec: SweepRecord, recovered: dict, region_mask: np.ndarray,
                   tube_radius: float | None = None) -> dict:
    """Error of both estimates against the plan's true source on a window."""
    plan = rec.plan
    truth = np.zeros(plan.ctx.shape) if plan.f is None else plan.f.values
    out = {}
    for name in ("f_exact", "f_limit"):
        vals = recovered[name].values
        entry = {"rel_l2": relative_l2(plan.ctx, vals, truth, region_mask),
                 "sup": float(np.max(np.abs(vals[region_mask] - truth[region_mask])))}
        if tube_radius is not None:
            from .sweep import _distance_to_interface
            dist = _distance_to_interface(plan.ctx, rec.require_limit_set())
            sel = region_mask & (dist > tube_radius)
            entry["sup_outside_tube"] = float(
                np.max(np.abs(vals[sel] - truth[sel]))) if sel.any() else math.nan
        out[name] = entry
    return out


def recover_interface_and_perimeter(rec: SweepRecord, deltas=(0.0,),
                                    regions=None) -> dict:
    """Sharpest-level level sets plus energy-based and direct perimeters.

    Per region: the localized Sobolev energy of the sharpest minimizer over
    2 c_{n,s}, next to the direct perimeter of the extracted set — two
    routes to the same limit quantity, reported side by side.
    """
    plan = rec.plan
    kf = len(rec.eps_list) - 1
    u = rec.reports[kf].u
    interfaces = {}
    trivial = {}
    for d in deltas:
        ps = extract_interface(u, float(d))
        trivial[d] = not ps.has_interface
        interfaces[d] = interface_points(ps) if ps.has_interface else None
    if regions is None:
        regions = [(plan.probe_lo, plan.probe_hi)]
    ps0 = rec.require_limit_set()
    perims = []
    for lo, hi in regions:
        mask = box_region(plan.ctx, lo, hi)
        e_route = rec.op.sobolev_energy(u, region=mask) / (2.0 * plan.ctx.c_ns)
        d_route = perimeter(rec.op, ps0, region=mask)
        rel = abs(e_route - d_route) / max(abs(d_route), 1e-300)
        perims.append({"lo": lo, "hi": hi, "energy_route": e_route,
                       "direct_route": d_route, "rel_gap": rel})
    return {"interfaces": interfaces, "trivial": trivial, "perimeters": perims,
            "k": kf, "eps": rec.eps_list[kf]}


@dataclass
class Reconstruction:
    w1_coeffs: tuple
    w1_diagnostics: dict
    potential: Potential | None
    f_exact: GridFunction
    f_limit: GridFunction
    interface_pts: np.ndarray | None
    perimeters: list
    diagnostics: dict = field(default_factory=dict)


def reconstruct(rec: SweepRecord, meas: Measurement, variant: str = "i",
                degree: int = 3, well_prior=None, regions=None) -> Reconstruction:
    """Full pipeline: W' (variant i fits it; variant ii takes it as known),
    then source, interface, and perimeters."""
    if variant == "i":
        fit = fit_W1(sample_W1_graph(meas), degree, well_prior=well_prior)
        coeffs = fit["coeffs"]
        diag = fit
    elif variant == "ii":
        coeffs = tuple(float(c) for c in rec.plan.pot.d1)
        diag = {"coeffs": coeffs, "source": "known potential (variant ii)"}
    else:
        raise ValueError("variant must be 'i' or 'ii'")
    try:
        pot = potential_from_W1(coeffs)
    except ValueError:
        pot = None
    fr = recover_f(rec, coeffs)
    ip = recover_interface_and_perimeter(rec, deltas=(0.0,), regions=regions)
    return Reconstruction(
        w1_coeffs=tuple(coeffs), w1_diagnostics=diag, potential=pot,
        f_exact=fr["f_exact"], f_limit=fr["f_limit"],
        interface_pts=ip["interfaces"][0.0], perimeters=ip["perimeters"],
        diagnostics={"estimator_gap_sup": fr["estimator_gap_sup"],
                     "variant": variant, "trivial": ip["trivial"][0.0]})


# ---------------------------------------------------------------------------
# uniqueness harness


def _monotone_window(coeffs, well: float) -> tuple:
    """Largest interval around a well where the fitted W'' stays positive."""
    d2 = npoly.polyder(np.asarray(coeffs, dtype=float))
    roots = [float(np.real(r)) for r in npoly.polyroots(d2)
             if abs(np.imag(r)) < 1e-9]
    lo, hi = -math.inf, math.inf
    for r in roots:
        if r < well:
            lo = max(lo, r)
        elif r > well:
            hi = min(hi, r)
    return (lo, hi)


def _well_assignment(meas: Measurement, coeffs, wells) -> dict:
    """Variant-(ii) disambiguation: which monotone well branch explains the
    operator measurements alone.

    For each well, w-values must land in the range of W' over that well's
    monotonicity window; a unique admissible well pins u on V without u being
    measured.  Two admissible wells mean the translate ambiguity survives.
    """
    samples = sample_W1_graph(meas)
    w = samples["w"]
    admissible = []
    for well in wells:
        lo, hi = _monotone_window(coeffs, well)
        span = 0.5 * max(1.0, abs(well))
        a = max(lo, well - span)
        b = min(hi, well + span)
        tt = np.linspace(a, b, 512)
        vals = npoly.polyval(tt, np.asarray(coeffs, dtype=float))
        pad = 1e-6 + 0.05 * (vals.max() - vals.min())
        if np.all((w > vals.min() - pad) & (w < vals.max() + pad)):
            admissible.append(float(well))
    return {"admissible_wells": admissible,
            "unique": len(admissible) == 1,
            "translate_ambiguity": len(admissible) > 1}


def _compatible(a: Measurement, b: Measurement):
    if a.ctx.n != b.ctx.n or a.ctx.s != b.ctx.s or a.ctx.h != b.ctx.h \
            or a.ctx.R != b.ctx.R:
        raise ValueError("incomparable datasets: different grids or exponents")
    if tuple(a.eps_list) != tuple(b.eps_list):
        raise ValueError("incomparable datasets: different eps ladders")
    if a.V_mask.shape != b.V_mask.shape or np.any(a.V_mask != b.V_mask):
        raise ValueError("incomparable datasets: different windows V")


def uniqueness_harness(rec1: SweepRecord, meas1: Measurement,
                       rec2: SweepRecord, meas2: Measurement,
                       variant: str = "i", tol_V: float = 1e-6,
                       degree: int = 3, well_prior=None) -> dict:
    """Equal window measurements must force equal reconstructions.

    Compares the V streams level by level (variant i: both u and the
    operator field; variant ii: the operator field only, then the monotone
    well-branch argument stands in for u agreement).  On agreement, both
    datasets are reconstructed and compared at reconstruction tolerances;
    on disagreement, the first distinguishing level and node are reported.
    """
    _compatible(meas1, meas2)
    streams = ["lap"] if variant == "ii" else ["u", "lap"]
    first_diff = None
    per_k = []
    for k in range(meas1.n_levels):
        lvl = 0.0
        for name in streams:
            a = (meas1.u_V if name == "u" else meas1.lap_V)[k]
            b = (meas2.u_V if name == "u" else meas2.lap_V)[k]
            d = np.abs(a - b)
            lvl = max(lvl, float(d.max()))
            if first_diff is None and d.max() > tol_V:
                first_diff = {"k": k, "stream": name,
                              "node": int(np.argmax(d)),
                              "magnitude": float(d.max())}
        per_k.append(lvl)
    out = {"variant": variant, "tol_V": tol_V,
           "max_discrepancy": max(per_k),
           "per_level_discrepancy": per_k,
           "measurements_agree": first_diff is None,
           "first_difference": first_diff}
    if first_diff is not None:
        return out
    r1 = reconstruct(rec1, meas1, variant=variant, degree=degree,
                     well_prior=well_prior)
    r2 = reconstruct(rec2, meas2, variant=variant, degree=degree,
                     well_prior=well_prior)
    h = rec1.plan.ctx.h
    c1 = np.asarray(r1.w1_coeffs)
    c2 = np.asarray(r2.w1_coeffs)
    w1_gap = float(np.max(np.abs(c1 - c2)))
    mask = rec1.plan.probe_mask()
    f_gap = relative_l2(rec1.plan.ctx, r1.f_exact.values, r2.f_exact.values, mask)
    if r1.interface_pts is None or r2.interface_pts is None:
        iface_gap = math.inf if (r1.interface_pts is None) != (r2.interface_pts is None) else 0.0
    else:
        iface_gap = max(hausdorff_gap(r1.interface_pts, r2.interface_pts))
    p_gap = max(abs(p1["direct_route"] - p2["direct_route"])
                / max(abs(p2["direct_route"]), 1e-300)
                for p1, p2 in zip(r1.perimeters, r2.perimeters))
    agree = {"w1": w1_gap < 1e-2, "f": f_gap < 0.05,
             "interface": iface_gap <= 2.0 * h, "perimeter": p_gap < 0.15}
    out.update({"reconstructions": (r1, r2),
                "gaps": {"w1": w1_gap, "f": f_gap, "interface": iface_gap,
                         "perimeter": p_gap},
                "reconstructions_agree": all(agree.values()),
                "agreement": agree})
    if variant == "ii":
        wells = rec1.plan.pot.wells
        out["well_branch"] = {
            "dataset1": _well_assignment(meas1, r1.w1_coeffs, wells),
            "dataset2": _well_assignment(meas2, r2.w1_coeffs, wells)}
    return out
