"""Shared fixtures.

Heavy objects (operators, sweep records) are session-scoped and built once;
individual tests must treat them as read-only.
"""
import numpy as np
import pytest

from fracac import (
    FracOperator,
    SweepPlan,
    build_context,
    grid_function_from_callable,
    make_exterior,
    make_polynomial,
    make_quartic,
    make_source,
    run_sweep,
)

# Stiffened symmetric double well: wells at +-1, W''(+-1) = 20 instead of the
# quartic's 2.  The far-field tails of minimizers scale like 1/W''(+-1), so
# this potential reaches its limit set an order of magnitude faster in eps —
# which keeps sweep-diagnostic tests sharp on short ladders.
STIFF_COEFFS = (2.5, 0.0, -5.0, 0.0, 2.5)


@pytest.fixture(scope="session")
def ctx1d():
    ctx, _ = build_context(1, 0.25, 0.02, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    return ctx


@pytest.fixture(scope="session")
def dom1d():
    _, dom = build_context(1, 0.25, 0.02, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    return dom


@pytest.fixture(scope="session")
def op1d(ctx1d):
    return FracOperator(ctx1d)


@pytest.fixture(scope="session")
def ctx2d():
    ctx, _ = build_context(2, 0.25, 0.1, 6.0, {"type": "disc", "cx": 0.0, "cy": 0.0, "r": 1.0})
    return ctx


@pytest.fixture(scope="session")
def op2d(ctx2d):
    return FracOperator(ctx2d)


@pytest.fixture(scope="session")
def quartic():
    return make_quartic()


def _sweep_plan(ctx, dom, pot, eps_list, *, source=None, seed=3, **kw):
    f, supp = make_source(ctx, source)
    g = make_exterior(ctx, pot, {"kind": "mollified_sign", "width": 0.2})
    return SweepPlan(
        ctx=ctx, dom=dom, g=g, pot=pot, f=f,
        eps_list=tuple(eps_list),
        probe_lo=-0.75, probe_hi=0.75,
        f_support=supp, seed=seed, **kw,
    )


@pytest.fixture(scope="session")
def stiff_sweep():
    """Short stiffened ladder on a coarse grid; basis for sweep-check tests."""
    ctx, dom = build_context(1, 0.25, 0.01, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    pot = make_polynomial(STIFF_COEFFS)
    plan = _sweep_plan(ctx, dom, pot, (0.4, 0.2, 0.1), grad_tol=1e-8)
    return run_sweep(plan)


@pytest.fixture(scope="session")
def forced_sweep():
    """Quartic ladder with a bump source; basis for inversion tests.

    The source support (|x| <= 0.2) stays clear of the measurement window
    V = (0.5, 0.7) used throughout test_inverse.
    """
    ctx, dom = build_context(1, 0.25, 0.01, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    pot = make_quartic()
    src = {"kind": "bump", "amplitude": 1.0, "center": 0.0, "width": 0.2}
    plan = _sweep_plan(ctx, dom, pot, (0.8, 0.4, 0.2, 0.1, 0.05), source=src, grad_tol=1e-8)
    return run_sweep(plan)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260814)
