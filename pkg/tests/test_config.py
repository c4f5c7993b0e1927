"""Config validation: every failure carries a dotted field path.

The published schema in docs/schema.json is checked two ways: it must be a
valid JSON Schema document, and the configs these tests build must validate
against it — so the schema, the validator code, and the tests cannot drift
apart silently.
"""
import json

import jsonschema
import numpy as np
import pytest

from fracac import make_exterior
from fracac.config import ConfigError, build_experiment, load_config

SCHEMA_PATH = "docs/schema.json"


def base_cfg(**over):
    cfg = {
        "context": {"n": 1, "s": 0.25, "h": 0.02, "R": 4.0,
                    "omega": {"type": "interval", "a": -1.0, "b": 1.0}},
        "exterior": {"kind": "mollified_sign", "mollification_width": 0.2},
        "solve": {"eps": 0.25, "grad_tol": 1e-7},
        "output": {"dir": "out", "plots": False, "precision": 12},
        "seed": 7,
    }
    cfg.update(over)
    return cfg


def full_cfg():
    return base_cfg(
        potential={"kind": "quartic"},
        source={"kind": "bump", "amplitude": 1.0, "center": 0.0, "width": 0.2},
        sweep={"eps_list": [0.4, 0.2], "probe_region": {"lo": -0.75, "hi": 0.75},
               "tube_radius": 0.2},
        inverse={"V": {"lo": 0.5, "hi": 0.7}, "variant": "i", "degree": 3},
    )


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


# ---------------------------------------------------------------------------
# file loading


def test_load_config_round_trip(tmp_path):
    cfg = base_cfg()
    assert load_config(write_cfg(tmp_path, cfg)) == cfg


def test_load_config_missing_file(tmp_path):
    missing = str(tmp_path / "nope.json")
    with pytest.raises(ConfigError) as ei:
        load_config(missing)
    assert ei.value.field == missing
    assert "not found" in ei.value.reason


def test_load_config_reports_json_error_with_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "context": oops\n}\n')
    with pytest.raises(ConfigError) as ei:
        load_config(str(p))
    assert ei.value.field.endswith(":2")  # file:line of the parse failure
    assert "invalid JSON" in ei.value.reason


def test_load_config_top_level_shape(tmp_path):
    p = tmp_path / "arr.json"
    p.write_text("[1, 2]\n")
    with pytest.raises(ConfigError, match="top-level config"):
        load_config(str(p))


def test_load_config_rejects_unknown_block(tmp_path):
    cfg = base_cfg(extras={"x": 1})
    with pytest.raises(ConfigError) as ei:
        load_config(write_cfg(tmp_path, cfg))
    assert ei.value.field == "extras"
    assert ei.value.reason == "unknown config block"


# ---------------------------------------------------------------------------
# experiment building


def test_build_minimal_experiment():
    exp = build_experiment(base_cfg())
    assert exp.ctx.n == 1 and exp.ctx.s == 0.25 and exp.ctx.h == 0.02
    assert exp.pot.wells == (-1.0, 1.0)  # quartic is the default potential
    assert exp.f is None and exp.f_support is None
    assert exp.seed == 7
    assert exp.out_dir == "out" and exp.plots is False and exp.precision == 12
    ref = make_exterior(exp.ctx, exp.pot, {"kind": "mollified_sign", "width": 0.2})
    assert np.array_equal(exp.g.values, ref.values)


def test_output_defaults():
    cfg = base_cfg()
    del cfg["output"]
    exp = build_experiment(cfg)
    assert exp.out_dir == "run" and exp.plots is True and exp.precision == 12


def test_context_block_required():
    cfg = base_cfg()
    del cfg["context"]
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "context"


def test_context_missing_field_path():
    cfg = base_cfg()
    del cfg["context"]["h"]
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "context.h"
    assert ei.value.reason == "missing required field"


def test_context_geometry_errors_are_wrapped():
    cfg = base_cfg()
    cfg["context"]["R"] = 1.5  # box too tight around omega
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "context"
    assert "too close" in ei.value.reason or "2*diam" in ei.value.reason


def test_potential_kinds():
    exp = build_experiment(base_cfg(potential={"kind": "multiwell",
                                               "wells": [-1.0, 0.0, 1.0]}))
    assert exp.pot.wells == (-1.0, 0.0, 1.0)
    exp = build_experiment(base_cfg(potential={"kind": "polynomial",
                                               "coeffs": [0.25, 0, -0.5, 0, 0.25]}))
    assert exp.pot.wells == (-1.0, 1.0)
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg(potential={"kind": "mystery"}))
    assert ei.value.field == "potential.kind"
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg(potential={"kind": "multiwell"}))
    assert ei.value.field == "potential.wells"


def test_source_support_must_stay_inside_omega():
    leak = {"kind": "bump", "amplitude": 1.0, "center": 0.95, "width": 0.2}
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg(source=leak))
    assert ei.value.field == "source"
    assert "leaks outside" in ei.value.reason
    # the check is advisory and can be switched off deliberately
    exp = build_experiment(base_cfg(source=dict(leak, support_check=False)))
    assert exp.f is not None


def test_source_and_exterior_errors_keep_block_paths():
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg(source={"kind": "mystery"}))
    assert ei.value.field == "source"
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg(exterior={"kind": "mystery"}))
    assert ei.value.field == "exterior"
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg(exterior={"kind": "mollified_sign",
                                            "mollification_width": -1.0}))
    assert ei.value.field == "exterior"
    assert "width must be positive" in ei.value.reason


def test_solve_config_construction():
    exp = build_experiment(base_cfg())
    cfg = exp.solve_config()
    assert cfg.eps == 0.25 and cfg.grad_tol == 1e-7 and cfg.seed == 7
    assert exp.solve_config(0.1).eps == 0.1

    blank = base_cfg()
    del blank["solve"]["eps"]
    with pytest.raises(ConfigError) as ei:
        build_experiment(blank).solve_config()
    assert ei.value.field == "solve.eps"

    bad = base_cfg(solve={"eps": 0.25, "step_rule": "newton"})
    with pytest.raises(ConfigError) as ei:
        build_experiment(bad).solve_config()
    assert ei.value.field == "solve"
    assert "step_rule" in ei.value.reason


def test_sweep_plan_from_config():
    exp = build_experiment(full_cfg())
    plan = exp.sweep_plan()
    assert plan.eps_list == (0.4, 0.2)
    assert plan.probe_lo == (-0.75,) and plan.probe_hi == (0.75,)
    assert plan.grad_tol == 1e-7  # inherited from the solve block
    assert plan.seed == 7
    assert plan.f is not None and plan.f_support == (-0.2, 0.2)
    assert exp.tube_radius() == 0.2


def test_tube_radius_default_is_grid_scaled():
    exp = build_experiment(base_cfg())
    assert exp.tube_radius() == 8 * exp.ctx.h


def test_sweep_block_validation():
    with pytest.raises(ConfigError) as ei:
        build_experiment(base_cfg()).sweep_plan()
    assert ei.value.field == "sweep"

    cfg = full_cfg()
    del cfg["sweep"]["probe_region"]
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "sweep.probe_region"

    cfg = full_cfg()
    del cfg["sweep"]["probe_region"]["hi"]
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "sweep.probe_region.hi"

    cfg = full_cfg()
    cfg["sweep"]["eps_list"] = [0.2, 0.4]
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "sweep"
    assert "strictly decreasing" in ei.value.reason


def test_inverse_block_validation():
    build_experiment(full_cfg())  # valid: V clear of the source

    cfg = full_cfg()
    del cfg["inverse"]["V"]
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "inverse.V"

    cfg = full_cfg()
    cfg["inverse"]["variant"] = "iii"
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "inverse.variant"

    cfg = full_cfg()
    cfg["inverse"]["degree"] = 0
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "inverse.degree"

    cfg = full_cfg()
    cfg["inverse"]["V"] = {"lo": 0.7, "hi": 0.5}
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "inverse.V"
    assert "lo < hi" in ei.value.reason


def test_inverse_window_cross_checked_against_source():
    cfg = full_cfg()
    cfg["inverse"]["V"] = {"lo": -0.1, "hi": 0.3}  # overlaps the bump
    with pytest.raises(ConfigError) as ei:
        build_experiment(cfg)
    assert ei.value.field == "inverse.V"
    assert "inverse.V vs source" in ei.value.reason


# ---------------------------------------------------------------------------
# the published schema


def test_schema_is_a_valid_schema():
    with open(SCHEMA_PATH, encoding="utf-8") as fh:
        schema = json.load(fh)
    jsonschema.Draft202012Validator.check_schema(schema)
    assert set(schema["required"]) == {"context"}
    # every block the loader accepts is documented, and nothing more
    assert set(schema["properties"]) == {
        "context", "potential", "source", "exterior", "sweep",
        "inverse", "solve", "output", "seed"}


def test_configs_validate_against_schema():
    with open(SCHEMA_PATH, encoding="utf-8") as fh:
        schema = json.load(fh)
    jsonschema.validate(base_cfg(), schema)
    jsonschema.validate(full_cfg(), schema)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate(base_cfg(extras={}), schema)
