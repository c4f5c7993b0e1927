"""Deterministic artifact files: CSV fields and tables, rounded JSON, runs.

Grid functions serialize as ``x[,y],value`` rows at a configurable number of
significant digits; JSON floats are rounded through the same precision so a
rerun with identical inputs and seed is byte-identical.  A sweep run
directory holds the config echo, a summary, and the per-level fields —
enough to reconstitute the full record for later inversion.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .grid import GridFunction, TailModel


def _fmt(x: float, precision: int) -> str:
    return f"{float(x):.{precision}e}"


def round_floats(obj, precision: int = 12):
    """Recursively pass floats through fixed-precision text (for stable JSON)."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(_fmt(obj, precision))
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, (np.floating,)):
        return round_floats(float(obj), precision)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return round_floats(obj.tolist(), precision)
    if isinstance(obj, dict):
        return {str(k): round_floats(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, precision) for v in obj]
    return obj


def write_json(path: str, obj, precision: int = 12) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(round_floats(obj, precision), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_grid_csv(path: str, ctx, values: np.ndarray, precision: int = 12) -> None:
    """Field CSV with coordinate columns: ``x,value`` or ``x,y,value``."""
    vals = np.asarray(values)
    with open(path, "w", encoding="utf-8") as fh:
        if ctx.n == 1:
            fh.write("x,value\n")
            for x, v in zip(ctx.axis_coords, vals):
                fh.write(f"{_fmt(x, precision)},{_fmt(v, precision)}\n")
        else:
            fh.write("x,y,value\n")
            ax = ctx.axis_coords
            for i, x in enumerate(ax):
                for j, y in enumerate(ax):
                    fh.write(f"{_fmt(x, precision)},{_fmt(y, precision)},"
                             f"{_fmt(vals[i, j], precision)}\n")


def read_grid_csv(path: str, ctx) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    vals = data[:, -1]
    if vals.size != int(np.prod(ctx.shape)):
        raise ValueError(f"{path}: row count does not match the context grid")
    return vals.reshape(ctx.shape)


def write_table_csv(path: str, header, rows, precision: int = 12) -> None:
    """Rows are dicts keyed by the header names; floats get fixed precision."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for key in header:
                v = row[key]
                if isinstance(v, bool):
                    cells.append(str(int(v)))
                elif isinstance(v, (int, np.integer)):
                    cells.append(str(int(v)))
                elif isinstance(v, (float, np.floating)):
                    cells.append(_fmt(v, precision) if math.isfinite(v) else str(v))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")


def write_points_csv(path: str, pts: np.ndarray, precision: int = 12) -> None:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    header = ",".join(("x", "y")[:pts.shape[1]])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in pts:
            fh.write(",".join(_fmt(v, precision) for v in row) + "\n")


def write_failure(out_dir: str, exc: Exception, stage: str,
                  partial: dict | None = None) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "failure.json")
    body = {"stage": stage, "error_type": type(exc).__name__,
            "message": str(exc)}
    if partial:
        body["partial"] = partial
    write_json(path, body)
    return path


# ---------------------------------------------------------------------------
# sweep run directories


def save_run(out_dir: str, cfg: dict, rec, precision: int = 12) -> None:
    """Persist a sweep: config echo, summary, per-level u and operator fields."""
    os.makedirs(out_dir, exist_ok=True)
    fields = os.path.join(out_dir, "fields")
    os.makedirs(fields, exist_ok=True)
    write_json(os.path.join(out_dir, "config.json"), cfg, precision)
    summary = {
        "eps_list": list(rec.eps_list),
        "trivial": list(rec.trivial),
        "levels": [
            {"eps": rep.eps, "iterations": rep.iterations,
             "final_energy": rep.final_energy, "grad_norm": rep.grad_norm,
             "stationarity_residual": rep.stationarity_residual,
             "max_principle_ok": rep.max_principle_ok,
             "converged": rep.converged}
            for rep in rec.reports],
    }
    write_json(os.path.join(out_dir, "records.json"), summary, precision)
    ctx = rec.plan.ctx
    for k in range(len(rec.eps_list)):
        write_grid_csv(os.path.join(fields, f"u_{k}.csv"), ctx,
                       rec.reports[k].u.values, precision)
        write_grid_csv(os.path.join(fields, f"lap_{k}.csv"), ctx,
                       rec.laps[k].values, precision)


def load_run(run_dir: str):
    """Reconstitute (config, SweepRecord) from a saved sweep directory.

    The plan is rebuilt from the config echo through the normal builders;
    solver scalars come from the summary; the u and operator fields are read
    back and the derived diagnostics (gradients, rearranged sources, level
    sets) are recomputed, which is deterministic given the stored fields.
    """
    from .config import build_experiment
    from .geometry import extract_interface
    from .grid import GridFunction
    from .operator import FracOperator
    from .potentials import eval_W1
    from .solve import SolveReport, gradient
    from .sweep import SweepRecord

    cfg = read_json(os.path.join(run_dir, "config.json"))
    summary = read_json(os.path.join(run_dir, "records.json"))
    exp = build_experiment(cfg)
    plan = exp.sweep_plan()
    if list(plan.eps_list) != [lvl["eps"] for lvl in summary["levels"]]:
        raise ValueError(f"{run_dir}: records.json does not match config.json")
    ctx, dom = plan.ctx, plan.dom
    op = FracOperator(ctx)
    wells = sorted(plan.pot.wells) if plan.pot.wells else (-1.0, 1.0)
    mid = 0.5 * (wells[0] + wells[-1])
    reports, laps, grads, qs, levels, trivial = [], [], [], [], [], []
    for k, lvl in enumerate(summary["levels"]):
        uv = read_grid_csv(os.path.join(run_dir, "fields", f"u_{k}.csv"), ctx)
        lv = read_grid_csv(os.path.join(run_dir, "fields", f"lap_{k}.csv"), ctx)
        u = GridFunction(ctx, uv, plan.g.tail)
        reports.append(SolveReport(
            u=u, iterations=int(lvl["iterations"]),
            final_energy=float(lvl["final_energy"]),
            grad_norm=float(lvl["grad_norm"]),
            stationarity_residual=float(lvl["stationarity_residual"]),
            max_principle_ok=bool(lvl["max_principle_ok"]),
            converged=bool(lvl["converged"]), eps=float(lvl["eps"]), s=ctx.s))
        laps.append(GridFunction(ctx, lv, TailModel.const(0.0), valid_mask=dom.omega_mask))
        grads.append(gradient(op, dom, u, plan.pot, plan.f, lvl["eps"]))
        ieps = float(lvl["eps"]) ** (-2.0 * ctx.s)
        qv = -ieps * eval_W1(plan.pot, uv)
        if plan.f is not None:
            qv = qv + plan.f.values
        qs.append(GridFunction(ctx, qv, TailModel.const(0.0), valid_mask=dom.omega_mask))
        ps = extract_interface(u, mid)
        levels.append(ps)
        trivial.append(not ps.has_interface)
    limit = levels[-1] if levels and levels[-1].has_interface else None
    rec = SweepRecord(plan=plan, op=op, reports=reports, laps=laps, grads=grads,
                      q_fields=qs, level_zero=levels, trivial=trivial,
                      limit_set=limit)
    return cfg, rec
