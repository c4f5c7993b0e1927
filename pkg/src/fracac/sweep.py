"""Interface-width sweeps and sharp-limit diagnostics.

A sweep solves the same data at a strictly decreasing list of interface
widths, warm-starting each solve from the previous minimizer, and extracts
the candidate limit set from the zero level of the sharpest profile.  The
checks then quantify, on an interior probe window, how the familiar limit
statements show up at finite resolution:

* uniform convergence of u_k to the +-1 indicator away from a tube around
  the limit interface (with the log-log rate reported),
* the localized Sobolev energy against 2 c_{n,s} times the limit perimeter,
* the source rearrangement f - eps^(-2s) W'(u_k) against the kernel field of
  the limit set, measured in a duality norm over a bank of smooth bumps,
* level sets at intermediate heights squeezing onto the limit interface.

Nothing here asserts; every check returns a table plus verdict booleans so
callers (tests, CLI) decide what is fatal.  Uniform phases are flagged and
the affected diagnostics degrade gracefully.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import (
    PhaseSet,
    Partition,
    box_region,
    extract_interface,
    hausdorff_gap,
    interface_points,
    partition_from_field,
    partition_perimeter,
    perimeter,
)
from .grid import Domain, FracContext, GridFunction, TailModel
from .operator import FracOperator
from .potentials import Potential, eval_W1
from .solve import SolveConfig, SolveReport, gradient, solve

_PROBE_MARGIN_CELLS = 4


# ---------------------------------------------------------------------------
# experiment data builders


def bump_values(z: np.ndarray) -> np.ndarray:
    """C-infinity bump exp(1 - 1/(1-z^2)) with support exactly [-1, 1]."""
    z = np.asarray(z, dtype=float)
    out = np.zeros(z.shape)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - zi * zi))
    return out


def make_source(ctx: FracContext, spec: dict | None):
    """Source field from its config block; returns (field|None, support|None)."""
    if spec is None or spec.get("kind", "none") == "none":
        return None, None
    if spec["kind"] != "bump":
        raise ValueError(f"unknown source kind {spec['kind']!r}")
    amp = float(spec.get("amplitude", 1.0))
    width = float(spec["width"])
    if width <= 0:
        raise ValueError("source width must be positive")
    if ctx.n == 1:
        center = float(spec.get("center", 0.0))
        vals = amp * bump_values((ctx.axis_coords - center) / width)
        support = (center - width, center + width)
    else:
        center = spec.get("center", (0.0, 0.0))
        cx, cy = float(center[0]), float(center[1])
        ax = ctx.axis_coords
        r = np.hypot(ax[:, None] - cx, ax[None, :] - cy)
        vals = amp * bump_values(r / width)
        support = (cx, cy, width)
    return GridFunction(ctx, vals, TailModel.const(0.0)), support


def _step(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(z))


def make_exterior(ctx: FracContext, pot: Potential, spec: dict) -> GridFunction:
    """Exterior datum g on all nodes plus its tail model.

    Kinds: ``const`` (a single well), ``sign`` (sharp two-well jump),
    ``mollified_sign`` (tanh ramp of width ``width``), ``wells_map`` (ramp
    between two named wells), and ``plateau`` (ramp through a middle well
    held on [lo, hi], for multiwell runs).  Ramps use the coordinate along
    ``axis`` (default 0) centered at ``pivot`` (default 0).
    """
    wells = sorted(pot.wells)
    if not wells:
        raise ValueError("exterior data needs a potential with wells")
    kind = spec["kind"]
    axis = int(spec.get("axis", 0))
    pivot = float(spec.get("pivot", 0.0))
    coord = ctx.coords()[axis]
    if kind == "const":
        val = float(spec.get("value", wells[0]))
        return GridFunction(ctx, np.full(ctx.shape, val), TailModel.const(val))
    if kind in ("sign", "mollified_sign", "wells_map"):
        if kind == "wells_map":
            lo = float(spec["neg"])
            hi = float(spec["pos"])
            if lo not in wells or hi not in wells:
                raise ValueError("wells_map values must be wells of the potential")
        else:
            lo, hi = float(wells[0]), float(wells[-1])
        if kind == "sign":
            vals = np.where(coord < pivot, lo, hi).astype(float)
        else:
            width = float(spec.get("width", 0.2))
            if width <= 0:
                raise ValueError("mollification width must be positive")
            vals = lo + (hi - lo) * _step((coord - pivot) / width)
        return GridFunction(ctx, vals, TailModel.split(pivot, lo, hi, axis=axis))
    if kind == "plateau":
        val = float(spec["value"])
        if val not in wells:
            raise ValueError("plateau value must be a well of the potential")
        lo_edge, hi_edge = float(spec["lo"]), float(spec["hi"])
        width = float(spec.get("width", 0.1))
        if not lo_edge < hi_edge:
            raise ValueError("plateau needs lo < hi")
        a, b = float(wells[0]), float(wells[-1])
        vals = a + (val - a) * _step((coord - lo_edge) / width) \
            + (b - val) * _step((coord - hi_edge) / width)
        return GridFunction(ctx, vals, TailModel.split(pivot, a, b, axis=axis))
    raise ValueError(f"unknown exterior kind {kind!r}")


# ---------------------------------------------------------------------------
# plans and records


@dataclass
class SweepPlan:
    """Validated description of one eps-sweep on a fixed grid and data."""

    ctx: FracContext
    dom: Domain
    g: GridFunction
    pot: Potential
    f: GridFunction | None
    eps_list: tuple
    probe_lo: tuple
    probe_hi: tuple
    f_support: tuple | None = None
    deltas: tuple = ()
    r_list: tuple = ()
    grad_tol: float = 1e-7
    max_iter: int = 40000
    seed: int = 0
    init: str = "tanh_profile"
    init_jitter: float = 0.0

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if not eps or any(e <= 0 for e in eps):
            raise ValueError("eps_list must be positive")
        if any(not a > b for a, b in zip(eps, eps[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        self.eps_list = eps
        wells = sorted(self.pot.wells) if self.pot.wells else (-1.0, 1.0)
        if not self.deltas:
            mid = 0.5 * (wells[0] + wells[-1])
            span = 0.25 * (wells[-1] - wells[0])
            self.deltas = (mid - span, mid, mid + span)
        self.deltas = tuple(float(d) for d in self.deltas)
        if any(not wells[0] < d < wells[-1] for d in self.deltas):
            raise ValueError("level-set heights must lie strictly between the extreme wells")
        if not self.r_list:
            self.r_list = (2 * self.ctx.h, 4 * self.ctx.h, 8 * self.ctx.h)
        self.r_list = tuple(float(r) for r in self.r_list)
        if any(r <= 0 for r in self.r_list) or any(
                not a < b for a, b in zip(self.r_list, self.r_list[1:])):
            raise ValueError("r_list must be positive and increasing")
        mask = self.probe_mask()
        if not mask.any():
            raise ValueError("probe region contains no nodes")
        eroded = ndimage.binary_erosion(
            self.dom.omega_mask, iterations=_PROBE_MARGIN_CELLS)
        if np.any(mask & ~eroded):
            raise ValueError(
                f"probe region must stay {_PROBE_MARGIN_CELLS} cells inside Omega")
        self.source_scale = 0.0
        if self.f is not None:
            fmax = float(np.max(np.abs(self.f.values)))
            self.source_scale = max(e ** (2.0 * self.ctx.s) for e in eps) * fmax

    def probe_mask(self) -> np.ndarray:
        return box_region(self.ctx, self.probe_lo, self.probe_hi)

    def solve_config(self, eps: float, **overrides) -> SolveConfig:
        kw = dict(eps=eps, grad_tol=self.grad_tol, max_iter=self.max_iter,
                  seed=self.seed, init=self.init, init_jitter=self.init_jitter)
        kw.update(overrides)
        return SolveConfig(**kw)


@dataclass
class SweepRecord:
    plan: SweepPlan
    op: FracOperator
    reports: list  # SolveReport per eps, sharpest last
    laps: list  # apply_all at each minimizer
    grads: list  # full gradient fields (diagnostic identity route)
    q_fields: list  # f - eps^(-2s) W'(u_k), the rearranged combination
    level_zero: list  # PhaseSet per k at delta = 0
    trivial: list  # per-k flag: no interface crossing
    limit_set: PhaseSet | None

    @property
    def eps_list(self):
        return self.plan.eps_list

    def u(self, k: int) -> GridFunction:
        return self.reports[k].u

    def require_limit_set(self) -> PhaseSet:
        if self.limit_set is None or not self.limit_set.has_interface:
            raise ValueError("sweep settled on a uniform phase; no limit interface")
        return self.limit_set


def run_sweep(plan: SweepPlan) -> SweepRecord:
    """Solve the eps ladder warm-started and collect limit diagnostics."""
    op = FracOperator(plan.ctx)
    wells = sorted(plan.pot.wells) if plan.pot.wells else (-1.0, 1.0)
    mid_level = 0.5 * (wells[0] + wells[-1])
    reports, laps, grads, qs, levels, trivial = [], [], [], [], [], []
    prev = None
    for k, eps in enumerate(plan.eps_list):
        if prev is None:
            cfg = plan.solve_config(eps)
        else:
            cfg = plan.solve_config(eps, init="custom", init_field=prev, init_jitter=0.0)
        rep = solve(op, plan.dom, plan.g, plan.pot, plan.f, cfg)
        prev = rep.u
        reports.append(rep)
        lap = op.apply_all(rep.u, domain=plan.dom)
        laps.append(lap)
        grads.append(gradient(op, plan.dom, rep.u, plan.pot, plan.f, eps))
        ieps = eps ** (-2.0 * plan.ctx.s)
        qv = -ieps * eval_W1(plan.pot, rep.u.values)
        if plan.f is not None:
            qv = qv + plan.f.values
        qs.append(GridFunction(plan.ctx, qv, TailModel.const(0.0), valid_mask=plan.dom.omega_mask))
        ps = extract_interface(rep.u, mid_level)
        levels.append(ps)
        trivial.append(not ps.has_interface)
    limit = levels[-1] if levels and levels[-1].has_interface else None
    return SweepRecord(plan=plan, op=op, reports=reports, laps=laps, grads=grads,
                       q_fields=qs, level_zero=levels, trivial=trivial, limit_set=limit)


# ---------------------------------------------------------------------------
# checks


def _distance_to_interface(ctx: FracContext, ps: PhaseSet) -> np.ndarray:
    pts = interface_points(ps)
    if ctx.n == 1:
        x = ctx.axis_coords
        return np.min(np.abs(x[:, None] - pts[:, 0][None, :]), axis=1)
    ax = ctx.axis_coords
    nodes = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    d = np.min(np.linalg.norm(nodes[:, None, :] - pts[None, :, :], axis=-1), axis=1)
    return d.reshape(ctx.shape)


def check_uniform_convergence(rec: SweepRecord, tube_radius: float) -> dict:
    """Sup of |u_k - u_*| over the probe window minus an interface tube.

    Returns rows [{eps, sup_err}], the fitted log-log slope, and verdicts:
    ``decreasing`` (at most one violation), ``final_below`` (< 0.05), and
    ``slope_in_band`` (within [s, 3s], a loose empirical bracket).
    """
    ps = rec.require_limit_set()
    ctx = rec.plan.ctx
    star = ps.label
    dist = _distance_to_interface(ctx, ps)
    sel = rec.plan.probe_mask() & (dist > tube_radius)
    if not sel.any():
        raise ValueError("tube radius leaves no probe nodes")
    rows = []
    for eps, rep in zip(rec.eps_list, rec.reports):
        err = float(np.max(np.abs(rep.u.values[sel] - star[sel])))
        rows.append({"eps": eps, "sup_err": err})
    errs = np.array([r["sup_err"] for r in rows])
    viol = int(np.sum(np.diff(errs) >= 0))
    if len(errs) >= 2:
        slope = float(np.polyfit(np.log(rec.eps_list),
                                 np.log(np.maximum(errs, 1e-300)), 1)[0])
    else:
        slope = math.nan
    s = ctx.s
    return {
        "rows": rows,
        "violations": viol,
        "decreasing": viol <= 1,
        "final_below": bool(errs[-1] < 0.05),
        "slope": slope,
        "slope_in_band": bool(s <= slope <= 3.0 * s),
        "tube_radius": tube_radius,
    }


def check_energy_perimeter(rec: SweepRecord) -> dict:
    """Probe-window energy against 2 c P_2s of the limit set, per eps."""
    ps = rec.require_limit_set()
    plan = rec.plan
    mask = plan.probe_mask()
    den = 2.0 * plan.ctx.c_ns * perimeter(rec.op, ps, region=mask)
    rows = []
    for eps, rep in zip(rec.eps_list, rec.reports):
        en = rec.op.sobolev_energy(rep.u, region=mask)
        rows.append({"eps": eps, "energy": en, "ratio": en / den})
    drift = np.abs(np.array([r["ratio"] for r in rows]) - 1.0)
    viol = int(np.sum(np.diff(drift) >= 0))
    return {
        "rows": rows,
        "perimeter_energy": den,
        "final_in_band": bool(0.85 <= rows[-1]["ratio"] <= 1.15),
        "toward_one": viol <= 1,
        "violations": viol,
    }


def limit_identity_field(rec: SweepRecord, k: int | None = None,
                         n_samples: int = 10000) -> dict:
    """The rearranged source field against the limit-set kernel field.

    lhs_k = f - eps_k^(-2s) W'(u_k) and rhs = (-Delta)^s applied to the +-1
    indicator of the limit set.  Also re-derives lhs from the other stored
    route (operator value minus gradient) at ``n_samples`` random (k, node)
    pairs; the two assemblies must agree to roundoff.
    """
    plan = rec.plan
    ps = rec.require_limit_set()
    if k is None:
        k = len(rec.eps_list) - 1
    rhs = rec.op.apply_all(ps.indicator_difference(), domain=plan.dom)
    rng = np.random.default_rng(plan.seed + 17)
    omega_idx = np.flatnonzero(plan.dom.omega_mask.ravel())
    ks = rng.integers(0, len(rec.eps_list), size=n_samples)
    xs = rng.choice(omega_idx, size=n_samples)
    worst = 0.0
    for kk, flat in zip(ks, xs):
        q_direct = rec.q_fields[kk].values.ravel()[flat]
        q_other = rec.laps[kk].values.ravel()[flat] - rec.grads[kk].values.ravel()[flat]
        worst = max(worst, float(abs(q_direct - q_other)))
    return {
        "k": int(k),
        "lhs": rec.q_fields[k],
        "rhs": rhs,
        "identity_residual": worst,
        "identity_ok": worst < 1e-12,
    }


def duality_gaps(rec: SweepRecord, n_bank: int = 20) -> dict:
    """Weak-norm gaps <lhs_k - rhs, phi> / sqrt(pairing(phi, phi)) over a bump bank."""
    plan = rec.plan
    ctx = plan.ctx
    ps = rec.require_limit_set()
    rhs = rec.op.apply_all(ps.indicator_difference(), domain=plan.dom).values
    rng = np.random.default_rng(plan.seed + 23)
    lo = np.broadcast_to(np.asarray(plan.probe_lo, dtype=float), (ctx.n,))
    hi = np.broadcast_to(np.asarray(plan.probe_hi, dtype=float), (ctx.n,))
    mask = plan.probe_mask()
    vol = ctx.cell_volume
    bank = []
    for _ in range(n_bank):
        center = [rng.uniform(a + 0.2 * (b - a), b - 0.2 * (b - a)) for a, b in zip(lo, hi)]
        width = [rng.uniform(0.1, 0.45) * (b - a) for a, b in zip(lo, hi)]
        prof = np.ones(ctx.shape)
        for ax in range(ctx.n):
            z = (ctx.coords()[ax] - center[ax]) / width[ax]
            prof = prof * bump_values(z)
        phi = np.where(mask, prof, 0.0)
        pf = GridFunction(ctx, phi, TailModel.const(0.0))
        nrm = math.sqrt(rec.op.pairing(pf, pf))
        if nrm > 0:
            bank.append((phi, nrm))
    rows = []
    for eps, qf in zip(rec.eps_list, rec.q_fields):
        gap = max(abs(float(np.sum((qf.values - rhs) * phi)) * vol) / nrm
                  for phi, nrm in bank)
        rows.append({"eps": eps, "gap": gap})
    gaps = np.array([r["gap"] for r in rows])
    return {
        "rows": rows,
        "bank_size": len(bank),
        "decreasing": bool(np.all(np.diff(gaps) < 0)),
        "violations": int(np.sum(np.diff(gaps) >= 0)),
    }


def check_level_sets(rec: SweepRecord, deltas=None, r_list=None) -> dict:
    """Hausdorff squeeze of intermediate level sets onto the limit interface."""
    plan = rec.plan
    ps = rec.require_limit_set()
    deltas = plan.deltas if deltas is None else tuple(deltas)
    r_list = plan.r_list if r_list is None else tuple(r_list)
    target = interface_points(ps)
    h = plan.ctx.h
    rows = []
    for k, (eps, rep) in enumerate(zip(rec.eps_list, rec.reports)):
        for delta in deltas:
            lev = extract_interface(rep.u, delta)
            if not lev.has_interface:
                rows.append({"k": k, "eps": eps, "delta": delta, "empty": True,
                             "gap_to_limit": math.inf, "gap_from_limit": math.inf})
                continue
            g1, g2 = hausdorff_gap(interface_points(lev), target)
            rows.append({"k": k, "eps": eps, "delta": delta, "empty": False,
                         "gap_to_limit": g1, "gap_from_limit": g2})
    verdict = {}
    for delta in deltas:
        gaps = np.array([max(r["gap_to_limit"], r["gap_from_limit"])
                         for r in rows if r["delta"] == delta])
        viol = int(np.sum(np.diff(gaps) > 0))
        k0 = {}
        for r in r_list:
            hit = next((k for k in range(len(gaps)) if np.all(gaps[k:] <= r)), None)
            k0[r] = hit
        verdict[delta] = {
            "gaps": gaps.tolist(),
            "decreasing": viol <= 1,
            "violations": viol,
            "final_within_2h": bool(gaps[-1] <= 2.0 * h),
            "k0": k0,
        }
    return {"rows": rows, "per_delta": verdict}


def warm_start_consistency(rec: SweepRecord, k: int) -> dict:
    """Re-solve level k cold; the final energies must agree to 1e-6 relative."""
    plan = rec.plan
    cfg = plan.solve_config(plan.eps_list[k])
    cold = solve(rec.op, plan.dom, plan.g, plan.pot, plan.f, cfg)
    warm_e = rec.reports[k].final_energy
    rel = abs(cold.final_energy - warm_e) / max(1.0, abs(warm_e))
    return {"k": k, "cold_energy": cold.final_energy, "warm_energy": warm_e,
            "rel_gap": rel, "consistent": rel < 1e-6}


# ---------------------------------------------------------------------------
# multiphase sweep


def run_partition_sweep(plan: SweepPlan) -> dict:
    """Sweep a multiwell potential and track the induced partitions.

    Requires f = 0 (the partition functional has no source term).  Per eps:
    nearest-well labels, which wells are missing from Omega (flagged, not
    fatal), and the interface count along the first axis.  The energy ratio
    uses (c/2) times the partition perimeter of the sharpest labels.
    """
    if plan.f is not None and np.any(plan.f.values):
        raise ValueError("partition sweeps require a vanishing source")
    if len(plan.pot.wells) < 2:
        raise ValueError("partition sweeps need a multiwell potential")
    rec = run_sweep(plan)
    wells = tuple(sorted(plan.pot.wells))
    mask = plan.probe_mask()
    omega = plan.dom.omega_mask
    rows = []
    parts = []
    for k, (eps, rep) in enumerate(zip(rec.eps_list, rec.reports)):
        part = partition_from_field(rep.u, wells)
        parts.append(part)
        present = sorted(set(np.unique(part.labels[omega])))
        missing = [w for w in wells if w not in present]
        lab_line = part.labels[omega] if plan.ctx.n == 1 else part.labels[:, part.labels.shape[1] // 2][omega[:, part.labels.shape[1] // 2]]
        flips = int(np.sum(np.diff(lab_line) != 0))
        rows.append({"k": k, "eps": eps, "wells_present": present,
                     "missing_wells": missing, "interfaces": flips})
    pstar = parts[-1]
    den = 0.5 * plan.ctx.c_ns * partition_perimeter(rec.op, pstar, region=mask)
    ratio_rows = []
    for eps, rep in zip(rec.eps_list, rec.reports):
        en = rec.op.sobolev_energy(rep.u, region=mask)
        ratio_rows.append({"eps": eps, "energy": en,
                           "ratio": en / den if den > 0 else math.inf})
    final_ratio = ratio_rows[-1]["ratio"]
    return {
        "record": rec,
        "partitions": parts,
        "rows": rows,
        "ratio_rows": ratio_rows,
        "partition_energy": den,
        "final_in_band": bool(0.8 <= final_ratio <= 1.2),
    }
