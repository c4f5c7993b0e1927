"""Batch front door: subcommands over JSON configs, deterministic artifacts.

Exit protocol: 0 success with all declared outputs written; 2 configuration
failure with a field-level diagnostic on stderr; 1 numerical failure with
whatever partial outputs exist plus failure.json in the output directory.

FRACAC_THREADS caps the BLAS/FFT worker count; it must take effect before
numpy loads, hence the deferred imports everywhere below.
"""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap() -> None:
    cap = os.environ.get("FRACAC_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(var, cap)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="fracac",
        description="fractional Allen-Cahn laboratory: forward solves, "
                    "interface-width sweeps, nonlocal geometry, inversion")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(sp, out_default):
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", default=out_default, help="output directory")

    sp = sub.add_parser("forward", help="single minimization at solve.eps")
    with_config(sp, "run")
    sp.add_argument("--dump-stencil", action="store_true",
                    help="also write one operator stencil row per axis to CSV")

    sp = sub.add_parser("sweep", help="eps ladder with limit diagnostics")
    with_config(sp, "run")

    sp = sub.add_parser("curvature", help="nonlocal curvature of the omega-shaped set")
    with_config(sp, "geom")

    sp = sub.add_parser("perimeter", help="fractional perimeter of the omega-shaped set")
    with_config(sp, "geom")

    sp = sub.add_parser("partition", help="multiwell sweep with partition diagnostics")
    with_config(sp, "run")

    sp = sub.add_parser("invert", help="reconstruct W', f, interface from a saved sweep")
    sp.add_argument("--data", required=True, help="sweep run directory")
    sp.add_argument("--data2", default=None, help="second run directory (uniqueness)")
    sp.add_argument("--variant", choices=("i", "ii"), default="i")
    sp.add_argument("--wprime-degree", type=int, default=3)
    sp.add_argument("--well-prior", default=None,
                    help="comma-separated wells where W' is pinned to zero")
    sp.add_argument("--noise", type=float, default=0.0,
                    help="additive uniform measurement noise amplitude")
    sp.add_argument("--out", default="inv")

    sp = sub.add_parser("validate", help="check a config end to end, run nothing")
    sp.add_argument("--config", required=True)
    return p


def main(argv=None) -> int:
    _apply_thread_cap()
    args = build_parser().parse_args(argv)
    from .config import ConfigError

    try:
        handler = {
            "forward": _cmd_forward,
            "sweep": _cmd_sweep,
            "curvature": _cmd_curvature,
            "perimeter": _cmd_perimeter,
            "partition": _cmd_partition,
            "invert": _cmd_invert,
            "validate": _cmd_validate,
        }[args.command]
        return handler(args)
    except ConfigError as e:
        print(f"config error at {e.field}: {e.reason}", file=sys.stderr)
        return 2


def _load(args):
    from .config import build_experiment, load_config
    cfg = load_config(args.config)
    return cfg, build_experiment(cfg)


def _numerical_failure(out_dir, exc, stage):
    from .io import write_failure
    path = write_failure(out_dir, exc, stage)
    print(f"numerical failure during {stage}: {exc} (see {path})", file=sys.stderr)
    return 1


def _cmd_validate(args) -> int:
    _load(args)
    print("config ok")
    return 0


def _cmd_forward(args) -> int:
    cfg, exp = _load(args)
    from . import io
    from .operator import FracOperator
    from .solve import SolveError, solve

    os.makedirs(args.out, exist_ok=True)
    op = FracOperator(exp.ctx)
    if args.dump_stencil:
        dump = op.stencil_dump()
        rows = []
        if exp.ctx.n == 1:
            for off, w in enumerate(dump["pair_weights"]):
                rows.append({"i": off, "j": 0, "weight": w})
        else:
            for i, line in enumerate(dump["pair_weights"]):
                for j, w in enumerate(line):
                    rows.append({"i": i, "j": j, "weight": w})
        io.write_table_csv(os.path.join(args.out, "stencil.csv"),
                           ["i", "j", "weight"], rows, exp.precision)
    try:
        rep = solve(op, exp.dom, exp.g, exp.pot, exp.f, exp.solve_config())
    except SolveError as e:
        return _numerical_failure(args.out, e, "forward solve")
    io.write_grid_csv(os.path.join(args.out, "u.csv"), exp.ctx,
                      rep.u.values, exp.precision)
    io.write_json(os.path.join(args.out, "report.json"), rep.report_dict(),
                  exp.precision)
    if not rep.converged:
        err = RuntimeError(
            f"iteration budget exhausted at gradient sup {rep.grad_norm:.3e} "
            f"(tolerance {exp.solve_config().grad_tol:g}); partial u.csv and "
            "report.json written")
        return _numerical_failure(args.out, err, "forward solve")
    print(f"forward: {rep.iterations} iterations, "
          f"stationarity {rep.stationarity_residual:.3e}")
    return 0


def _run_sweep_and_checks(exp):
    from .sweep import (check_energy_perimeter, check_level_sets,
                        check_uniform_convergence, duality_gaps,
                        limit_identity_field, run_sweep)
    rec = run_sweep(exp.sweep_plan())
    checks = {}
    if rec.limit_set is not None:
        checks["uniform"] = check_uniform_convergence(rec, exp.tube_radius())
        checks["energy"] = check_energy_perimeter(rec)
        li = limit_identity_field(rec)
        checks["limit_identity"] = {"identity_residual": li["identity_residual"],
                                    "identity_ok": li["identity_ok"], "k": li["k"]}
        checks["duality"] = duality_gaps(rec)
        checks["levelsets"] = check_level_sets(rec)
    return rec, checks


def _emit_sweep_tables(out, exp, rec, checks):
    from . import io
    p = exp.precision
    if "uniform" in checks:
        io.write_table_csv(os.path.join(out, "conv.csv"), ["eps", "sup_err"],
                           checks["uniform"]["rows"], p)
    if "energy" in checks:
        io.write_table_csv(os.path.join(out, "energy.csv"),
                           ["eps", "energy", "ratio"], checks["energy"]["rows"], p)
    if "duality" in checks:
        rows = [dict(r, identity_residual=checks["limit_identity"]["identity_residual"])
                for r in checks["duality"]["rows"]]
        io.write_table_csv(os.path.join(out, "limit_iv.csv"),
                           ["eps", "gap", "identity_residual"], rows, p)
    if "levelsets" in checks:
        io.write_table_csv(os.path.join(out, "levelsets.csv"),
                           ["k", "eps", "delta", "gap_to_limit", "gap_from_limit",
                            "empty"], checks["levelsets"]["rows"], p)


def _emit_sweep_plots(out, exp, rec, checks):
    from .svgplot import line_plot
    notes = []
    if exp.ctx.n == 1:
        xs = exp.ctx.axis_coords
        series = [(f"eps={eps:g}", xs, rep.u.values)
                  for eps, rep in zip(rec.eps_list, rec.reports)]
        line_plot(os.path.join(out, "profiles.svg"), series,
                  title="minimizer profiles", xlabel="x", ylabel="u")
    else:
        notes.append("profiles.svg: skipped (2D field; see CSV)")
    trend = len(rec.eps_list) >= 2
    if "energy" in checks and trend:
        rows = checks["energy"]["rows"]
        line_plot(os.path.join(out, "energy_ratio.svg"),
                  [("energy / (2c P)", [r["eps"] for r in rows],
                    [r["ratio"] for r in rows])],
                  title="localized energy vs limit perimeter",
                  xlabel="eps", ylabel="ratio", logx=True)
    else:
        notes.append("energy_ratio.svg: skipped "
                     + ("(single level, no trend)" if "energy" in checks
                        else "(no limit set)"))
    if "levelsets" in checks and trend:
        per = checks["levelsets"]["per_delta"]
        series = [(f"delta={d:+g}", list(rec.eps_list), v["gaps"])
                  for d, v in per.items()]
        line_plot(os.path.join(out, "levelset_gaps.svg"), series,
                  title="level-set Hausdorff gaps", xlabel="eps",
                  ylabel="gap", logx=True, logy=True)
    else:
        notes.append("levelset_gaps.svg: skipped "
                     + ("(single level, no trend)" if "levelsets" in checks
                        else "(no limit set)"))
    return notes


def _cmd_sweep(args) -> int:
    cfg, exp = _load(args)
    from . import io
    try:
        rec, checks = _run_sweep_and_checks(exp)
    except Exception as e:
        from .config import ConfigError
        if isinstance(e, ConfigError):
            raise
        return _numerical_failure(args.out, e, "sweep")
    io.save_run(args.out, cfg, rec, exp.precision)
    summary = io.read_json(os.path.join(args.out, "records.json"))
    summary["checks"] = _strip_fields(checks)
    io.write_json(os.path.join(args.out, "records.json"), summary, exp.precision)
    _emit_sweep_tables(args.out, exp, rec, checks)
    if exp.plots:
        for note in _emit_sweep_plots(args.out, exp, rec, checks):
            print(note)
    print(f"sweep: {len(rec.eps_list)} levels, trivial flags {rec.trivial}")
    return 0


def _strip_fields(checks):
    # tables already go to CSV; keep JSON to scalar verdicts
    out = {}
    for name, blk in checks.items():
        out[name] = {k: v for k, v in blk.items()
                     if k not in ("rows", "per_delta", "lhs", "rhs")}
        if name == "levelsets":
            out[name]["per_delta"] = {
                str(d): {k: v for k, v in vv.items() if k != "gaps"}
                for d, vv in blk["per_delta"].items()}
    return out


def _phase_from_omega(exp):
    from .geometry import disc_phase, interval_phase
    desc = exp.dom.desc
    if desc["type"] == "interval":
        return interval_phase(exp.ctx, desc["a"], desc["b"])
    if desc["type"] == "disc":
        return disc_phase(exp.ctx, (desc["cx"], desc["cy"]), desc["r"])
    raise ValueError(f"no phase-set construction for omega type {desc['type']!r}")


def _cmd_curvature(args) -> int:
    cfg, exp = _load(args)
    from . import io
    from .geometry import curvature_at, interface_points

    os.makedirs(args.out, exist_ok=True)
    try:
        ps = _phase_from_omega(exp)
        pts = interface_points(ps)
        rows = []
        for pt in pts:
            H = curvature_at(ps, tuple(pt))
            rows.append({"x": pt[0], "y": pt[1] if exp.ctx.n == 2 else 0.0,
                         "H": H, "cH": exp.ctx.c_ns * H})
    except Exception as e:
        return _numerical_failure(args.out, e, "curvature")
    io.write_table_csv(os.path.join(args.out, "curvature.csv"),
                       ["x", "y", "H", "cH"], rows, exp.precision)
    io.write_json(os.path.join(args.out, "curvature.json"),
                  {"samples": len(rows),
                   "sup_cH": max(abs(r["cH"]) for r in rows) if rows else None},
                  exp.precision)
    print(f"curvature: {len(rows)} interface samples")
    return 0


def _cmd_perimeter(args) -> int:
    cfg, exp = _load(args)
    from . import io
    from .geometry import perimeter
    from .operator import FracOperator

    os.makedirs(args.out, exist_ok=True)
    try:
        ps = _phase_from_omega(exp)
        op = FracOperator(exp.ctx)
        body = {"s": exp.ctx.s, "global": perimeter(op, ps)}
        if exp.sweep_block is not None:
            mask = exp.sweep_plan().probe_mask()
            body["probe_region"] = perimeter(op, ps, region=mask)
    except Exception as e:
        return _numerical_failure(args.out, e, "perimeter")
    io.write_json(os.path.join(args.out, "perimeter.json"), body, exp.precision)
    print(f"perimeter: {body['global']:.9g}")
    return 0


def _cmd_partition(args) -> int:
    cfg, exp = _load(args)
    from . import io
    from .sweep import run_partition_sweep
    try:
        res = run_partition_sweep(exp.sweep_plan())
    except Exception as e:
        from .config import ConfigError
        if isinstance(e, ConfigError):
            raise
        return _numerical_failure(args.out, e, "partition sweep")
    rec = res["record"]
    io.save_run(args.out, cfg, rec, exp.precision)
    io.write_table_csv(os.path.join(args.out, "partition.csv"),
                       ["k", "eps", "interfaces", "missing_wells"],
                       [dict(r, missing_wells=";".join(map(str, r["missing_wells"])))
                        for r in res["rows"]], exp.precision)
    io.write_table_csv(os.path.join(args.out, "energy.csv"),
                       ["eps", "energy", "ratio"], res["ratio_rows"], exp.precision)
    summary = io.read_json(os.path.join(args.out, "records.json"))
    summary["partition"] = {"final_in_band": res["final_in_band"],
                            "partition_energy": res["partition_energy"],
                            "rows": [dict(r) for r in res["rows"]]}
    io.write_json(os.path.join(args.out, "records.json"), summary, exp.precision)
    print(f"partition: final ratio in band = {res['final_in_band']}")
    return 0


def _cmd_invert(args) -> int:
    from . import io
    from .config import ConfigError
    from .inverse import (add_noise, make_measurement, reconstruct,
                          sample_W1_graph, uniqueness_harness)

    try:
        cfg, rec = io.load_run(args.data)
    except (OSError, ValueError) as e:
        print(f"config error at --data: {e}", file=sys.stderr)
        return 2
    inv = cfg.get("inverse")
    if inv is None:
        print("config error at inverse: run config has no inverse block",
              file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    precision = int(cfg.get("output", {}).get("precision", 12))
    well_prior = None
    if args.well_prior:
        well_prior = tuple(float(t) for t in args.well_prior.split(","))
    try:
        V = {"type": "box", "lo": inv["V"]["lo"], "hi": inv["V"]["hi"]}
        meas = make_measurement(rec, V, variant=args.variant)
        if args.noise > 0:
            meas = add_noise(meas, args.noise, seed=int(cfg.get("seed", 0)))
        if args.data2:
            cfg2, rec2 = io.load_run(args.data2)
            meas2 = make_measurement(rec2, V, variant=args.variant)
            verdict = uniqueness_harness(rec, meas, rec2, meas2,
                                         variant=args.variant,
                                         degree=args.wprime_degree,
                                         well_prior=well_prior)
            out_v = {k: v for k, v in verdict.items() if k != "reconstructions"}
            io.write_json(os.path.join(args.out, "verdict.json"), out_v, precision)
            print(f"uniqueness: measurements_agree={verdict['measurements_agree']}")
            if not verdict["measurements_agree"]:
                print(f"  first difference: {verdict['first_difference']}")
            return 0
        recon = reconstruct(rec, meas, variant=args.variant,
                            degree=args.wprime_degree, well_prior=well_prior)
    except (ValueError, ConfigError) as e:
        return _numerical_failure(args.out, e, "inversion")
    io.write_json(os.path.join(args.out, "wfit.json"),
                  {"coefficients": list(recon.w1_coeffs),
                   "residual": recon.w1_diagnostics.get("residual"),
                   "cond": recon.w1_diagnostics.get("cond"),
                   "variant": args.variant}, precision)
    ctx = rec.plan.ctx
    import numpy as np
    both = np.stack([recon.f_exact.values.ravel(),
                     recon.f_limit.values.ravel()], axis=-1)
    with open(os.path.join(args.out, "f_rec.csv"), "w", encoding="utf-8") as fh:
        fh.write("x,f_exact,f_limit\n" if ctx.n == 1 else "x,y,f_exact,f_limit\n")
        coords = (ctx.axis_coords if ctx.n == 1 else
                  np.stack([c.ravel() for c in ctx.coords()], axis=-1))
        for i in range(both.shape[0]):
            cc = ([coords[i]] if ctx.n == 1 else list(coords[i]))
            fh.write(",".join(f"{v:.{precision}e}" for v in cc) + ","
                     + ",".join(f"{v:.{precision}e}" for v in both[i]) + "\n")
    if recon.interface_pts is not None:
        io.write_points_csv(os.path.join(args.out, "interface.csv"),
                            recon.interface_pts, precision)
    io.write_json(os.path.join(args.out, "verdict.json"),
                  {"perimeters": recon.perimeters,
                   "diagnostics": recon.diagnostics,
                   "trivial_phase": recon.diagnostics.get("trivial")}, precision)
    if bool(cfg.get("output", {}).get("plots", True)):
        from .svgplot import line_plot
        samp = sample_W1_graph(meas)
        order = np.argsort(samp["t"])
        ts = samp["t"][order]
        import numpy.polynomial.polynomial as npoly
        line_plot(os.path.join(args.out, "wprime_fit.svg"),
                  [("samples", ts, samp["w"][order]),
                   ("fit", ts, npoly.polyval(ts, np.asarray(recon.w1_coeffs)))],
                  title="W' graph samples and fit", xlabel="t", ylabel="W'(t)")
    print(f"invert: coefficients {tuple(round(c, 6) for c in recon.w1_coeffs)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
