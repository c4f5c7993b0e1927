"""Experiment configuration: JSON blocks validated into live objects.

A config file is one JSON object with blocks ``context``, ``potential``,
``source``, ``exterior``, ``sweep``, ``inverse``, ``solve``, ``output`` and
a top-level ``seed``.  Every validation failure raises :class:`ConfigError`
carrying the dotted field path that caused it, so the CLI can print a
field-level diagnostic and exit with the configuration status code.  All
randomness anywhere downstream (bump banks, noise, init jitter) derives
from the single seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import Domain, FracContext, GridFunction, build_context
from .potentials import Potential, make_multiwell, make_polynomial, make_quartic
from .solve import SolveConfig
from .sweep import SweepPlan, make_exterior, make_source


class ConfigError(Exception):
    """Invalid configuration; ``field`` is the dotted path of the culprit."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path
        self.reason = message


_BLOCKS = ("context", "potential", "source", "exterior", "sweep",
           "inverse", "solve", "output")


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(str(path), "config file not found")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}", f"invalid JSON ({e.msg})")
    if not isinstance(cfg, dict):
        raise ConfigError(str(path), "top-level config must be a JSON object")
    for key in cfg:
        if key not in _BLOCKS + ("seed",):
            raise ConfigError(key, "unknown config block")
    return cfg


def _require(block: dict, block_name: str, key: str):
    if key not in block:
        raise ConfigError(f"{block_name}.{key}", "missing required field")
    return block[key]


@dataclass
class Experiment:
    """Fully built experiment state shared by the CLI subcommands."""

    raw: dict
    ctx: FracContext
    dom: Domain
    pot: Potential
    g: GridFunction
    f: GridFunction | None
    f_support: tuple | None
    seed: int
    sweep_block: dict | None
    inverse_block: dict | None
    solve_block: dict
    output_block: dict

    @property
    def out_dir(self) -> str:
        return self.output_block.get("dir", "run")

    @property
    def plots(self) -> bool:
        return bool(self.output_block.get("plots", True))

    @property
    def precision(self) -> int:
        return int(self.output_block.get("precision", 12))

    def solve_config(self, eps: float | None = None) -> SolveConfig:
        blk = self.solve_block
        if eps is None:
            eps = blk.get("eps")
            if eps is None:
                raise ConfigError("solve.eps", "missing required field")
        try:
            return SolveConfig(
                eps=float(eps),
                max_iter=int(blk.get("max_iter", 20000)),
                grad_tol=float(blk.get("grad_tol", 1e-6)),
                step_rule=blk.get("step_rule", "bb"),
                init=blk.get("init", "tanh_profile"),
                init_jitter=float(blk.get("init_jitter", 0.0)),
                seed=self.seed,
            )
        except ValueError as e:
            raise ConfigError("solve", str(e))

    def sweep_plan(self) -> SweepPlan:
        blk = self.sweep_block
        if blk is None:
            raise ConfigError("sweep", "missing sweep block")
        probe = _require(blk, "sweep", "probe_region")
        try:
            return SweepPlan(
                ctx=self.ctx, dom=self.dom, g=self.g, pot=self.pot,
                f=self.f, f_support=self.f_support,
                eps_list=tuple(_require(blk, "sweep", "eps_list")),
                probe_lo=tuple(np.atleast_1d(probe["lo"])),
                probe_hi=tuple(np.atleast_1d(probe["hi"])),
                deltas=tuple(blk.get("deltas", ())),
                r_list=tuple(blk.get("r_list", ())),
                grad_tol=float(self.solve_block.get("grad_tol", 1e-7)),
                max_iter=int(self.solve_block.get("max_iter", 40000)),
                seed=self.seed,
                init=self.solve_block.get("init", "tanh_profile"),
                init_jitter=float(self.solve_block.get("init_jitter", 0.0)),
            )
        except KeyError as e:
            raise ConfigError(f"sweep.probe_region.{e.args[0]}", "missing required field")
        except ValueError as e:
            raise ConfigError("sweep", str(e))

    def tube_radius(self) -> float:
        blk = self.sweep_block or {}
        return float(blk.get("tube_radius", 8 * self.ctx.h))


def build_experiment(cfg: dict) -> Experiment:
    """Validate every reachable block and construct the live objects."""
    ctxb = cfg.get("context")
    if ctxb is None:
        raise ConfigError("context", "missing required block")
    try:
        ctx, dom = build_context(
            int(_require(ctxb, "context", "n")),
            float(_require(ctxb, "context", "s")),
            float(_require(ctxb, "context", "h")),
            float(_require(ctxb, "context", "R")),
            _require(ctxb, "context", "omega"))
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError("context", str(e))

    potb = cfg.get("potential", {"kind": "quartic"})
    kind = potb.get("kind", "quartic")
    try:
        if kind == "quartic":
            pot = make_quartic()
        elif kind == "multiwell":
            pot = make_multiwell(tuple(_require(potb, "potential", "wells")))
        elif kind == "polynomial":
            pot = make_polynomial(tuple(_require(potb, "potential", "coeffs")))
        else:
            raise ConfigError("potential.kind", f"unknown kind {kind!r}")
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError("potential", str(e))

    srcb = cfg.get("source", {"kind": "none"})
    try:
        f, f_support = make_source(ctx, srcb)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError("source", str(e))
    if f is not None and srcb.get("support_check", True):
        sup = np.abs(f.values) > 0
        if np.any(sup & ~dom.omega_mask):
            raise ConfigError("source", "source support leaks outside Omega")

    extb = cfg.get("exterior", {"kind": "sign"})
    ext_spec = dict(extb)
    if "mollification_width" in ext_spec:
        ext_spec["width"] = ext_spec.pop("mollification_width")
    try:
        g = make_exterior(ctx, pot, ext_spec)
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError("exterior", str(e))

    seed = int(cfg.get("seed", 0))
    exp = Experiment(
        raw=cfg, ctx=ctx, dom=dom, pot=pot, g=g, f=f, f_support=f_support,
        seed=seed, sweep_block=cfg.get("sweep"), inverse_block=cfg.get("inverse"),
        solve_block=cfg.get("solve", {}), output_block=cfg.get("output", {}))

    if exp.sweep_block is not None:
        exp.sweep_plan()  # full validation of the sweep block

    inv = exp.inverse_block
    if inv is not None:
        V = _require(inv, "inverse", "V")
        variant = inv.get("variant", "i")
        if variant not in ("i", "ii"):
            raise ConfigError("inverse.variant", "must be 'i' or 'ii'")
        if int(inv.get("degree", 3)) < 1:
            raise ConfigError("inverse.degree", "degree must be at least 1")
        try:
            lo = np.atleast_1d(np.asarray(V["lo"], dtype=float))
            hi = np.atleast_1d(np.asarray(V["hi"], dtype=float))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("inverse.V", "V needs numeric lo/hi corners")
        if lo.size != ctx.n or hi.size != ctx.n or np.any(lo >= hi):
            raise ConfigError("inverse.V", "V corners must satisfy lo < hi per axis")
        if f_support is not None and ctx.n == 1:
            a, b = f_support
            if not (hi[0] <= a or lo[0] >= b):
                raise ConfigError(
                    "inverse.V",
                    f"window V [{lo[0]}, {hi[0]}] intersects the source support "
                    f"[{a}, {b}] set by the source block (inverse.V vs source)")
    return exp
