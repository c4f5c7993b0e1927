"""Operator-level checks: symbol restoration, exact discrete identities,
structure of the interaction matrix, and refinement behavior."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracac import (
    FracOperator,
    GridFunction,
    TailModel,
    build_context,
    grid_function_from_callable,
)


def _bump_field(ctx, center=0.0, width=0.6, amp=1.0):
    """Smooth compactly supported field with zero tail (safe for pairings)."""
    z = (ctx.axis_coords - center) / width
    vals = np.where(np.abs(z) < 1.0, np.exp(1.0 - 1.0 / np.maximum(1e-300, 1 - z**2)), 0.0)
    return GridFunction(ctx, amp * vals, tail=TailModel.const(0.0))


# ---------------------------------------------------------------------------
# Fourier symbol


def test_spectral_symbol_plane_wave():
    # on cos(kx) the operator must return k^(2s) cos(kx); the const-0 tail
    # model absorbs the truncated far field up to O(R^(-1-2s)/k)
    s, k, R, h = 0.25, 1.0, 120.0, 0.01
    ctx, _ = build_context(1, s, h, R, {"type": "interval", "a": -1.0, "b": 1.0})
    op = FracOperator(ctx)
    u = GridFunction(ctx, np.cos(k * ctx.axis_coords), tail=TailModel.const(0.0))
    mid = ctx.nodes_per_axis // 2
    sym = k ** (2 * s)
    for off in (0, 7, -15, 41):
        x = ctx.axis_coords[mid + off]
        got = op.apply_pointwise(u, mid + off)
        assert abs(got - sym * np.cos(k * x)) / sym < 1e-3


def test_constant_fields_are_annihilated(ctx1d, op1d):
    for c in (0.0, 1.0, -3.7):
        u = GridFunction(ctx1d, np.full(ctx1d.shape, c), tail=TailModel.const(c))
        out = op1d.apply_all(u)
        assert np.max(np.abs(out.values)) < 1e-12


def test_constant_annihilation_2d(ctx2d, op2d):
    u = GridFunction(ctx2d, np.full(ctx2d.shape, 2.5), tail=TailModel.const(2.5))
    out = op2d.apply_all(u)
    assert np.max(np.abs(out.values)) < 1e-12


def test_apply_is_linear(ctx1d, op1d):
    rng = np.random.default_rng(5)
    u = GridFunction(ctx1d, rng.standard_normal(ctx1d.shape), tail=TailModel.const(0.0))
    v = _bump_field(ctx1d)
    a, b = 1.7, -0.4
    comb = GridFunction(ctx1d, a * u.values + b * v.values, tail=TailModel.const(0.0))
    lhs = op1d.apply_raw(comb)
    rhs = a * op1d.apply_raw(u) + b * op1d.apply_raw(v)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-10 * max(1, np.max(np.abs(rhs))))


def test_apply_respects_parity(ctx1d, op1d):
    # even input -> even output, odd input -> odd output on the symmetric grid
    x = ctx1d.axis_coords
    even = GridFunction(ctx1d, np.exp(-x**2), tail=TailModel.const(0.0))
    odd = GridFunction(ctx1d, x * np.exp(-x**2), tail=TailModel.const(0.0))
    ev = op1d.apply_raw(even)
    od = op1d.apply_raw(odd)
    assert np.allclose(ev, ev[::-1], atol=1e-12)
    assert np.allclose(od, -od[::-1], atol=1e-12)


# ---------------------------------------------------------------------------
# exact discrete identities


def test_pairing_is_symmetric(ctx1d, op1d, rng):
    for _ in range(5):
        u = GridFunction(ctx1d, rng.standard_normal(ctx1d.shape), tail=TailModel.const(0.0))
        v = GridFunction(ctx1d, rng.standard_normal(ctx1d.shape), tail=TailModel.const(0.0))
        a, b = op1d.pairing(u, v), op1d.pairing(v, u)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_pairing_matches_apply_duality(ctx1d, op1d, rng):
    # <u, v> = h * sum apply_all(u) * v for zero-tail v: both sides use the
    # same weight table, so agreement is at roundoff, not discretization
    u = grid_function_from_callable(
        ctx1d, lambda x: np.tanh(3 * x), tail=TailModel.split(0.0, -1.0, 1.0)
    )
    v = _bump_field(ctx1d, center=0.3, width=0.5)
    lhs = op1d.pairing(u, v)
    rhs = ctx1d.cell_volume * float(np.sum(op1d.apply_all(u).values * v.values))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_pairing_requires_a_zero_tail(ctx1d, op1d):
    u = grid_function_from_callable(
        ctx1d, lambda x: np.tanh(x), tail=TailModel.split(0.0, -1.0, 1.0)
    )
    with pytest.raises(ValueError):
        op1d.pairing(u, u)


def test_energy_is_half_pairing_for_zero_tail(ctx1d, op1d, rng):
    u = GridFunction(ctx1d, rng.standard_normal(ctx1d.shape), tail=TailModel.const(0.0))
    e = op1d.sobolev_energy(u)
    p = op1d.pairing(u, u)
    assert e == pytest.approx(0.5 * p, rel=1e-12)
    assert e > 0


def test_energy_localization_monotone(ctx1d, op1d, rng):
    u = GridFunction(ctx1d, rng.standard_normal(ctx1d.shape), tail=TailModel.const(0.0))
    x = ctx1d.axis_coords
    small = np.abs(x) < 0.5
    large = np.abs(x) < 1.5
    e_small = op1d.sobolev_energy(u, region=small)
    e_large = op1d.sobolev_energy(u, region=large)
    e_all = op1d.sobolev_energy(u)
    assert 0 < e_small < e_large <= e_all * (1 + 1e-12)


def test_energy_shift_invariance_inside_box(ctx1d, op1d):
    # adding a constant shifts tails too; with matching tails the energy of
    # (u + c) equals the energy of u
    x = ctx1d.axis_coords
    u = GridFunction(ctx1d, np.tanh(2 * x), tail=TailModel.split(0.0, -1.0, 1.0))
    c = 0.7
    v = GridFunction(ctx1d, u.values + c, tail=TailModel.split(0.0, -1.0 + c, 1.0 + c))
    assert op1d.sobolev_energy(v) == pytest.approx(op1d.sobolev_energy(u), rel=1e-12)


def test_apply_pointwise_matches_apply_raw(ctx1d, op1d):
    u = grid_function_from_callable(
        ctx1d, lambda x: np.tanh(2 * x), tail=TailModel.split(0.0, -1.0, 1.0)
    )
    full = op1d.apply_all(u).values
    for i in (3, 100, 207, 399):
        assert op1d.apply_pointwise(u, i) == pytest.approx(full[i], rel=1e-12, abs=1e-12)
    # coordinate lookup snaps to the node
    xi = ctx1d.axis_coords[207]
    assert op1d.apply_pointwise(u, (xi,)) == pytest.approx(full[207], rel=1e-12, abs=1e-12)


def test_apply_requires_tail_model(ctx1d, op1d):
    u = GridFunction(ctx1d, np.zeros(ctx1d.shape), tail=None)
    with pytest.raises(ValueError):
        op1d.apply_raw(u)


# ---------------------------------------------------------------------------
# interaction matrix


def test_interaction_matrix_is_m_matrix(quartic):
    ctx, dom = build_context(1, 0.3, 0.05, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    op = FracOperator(ctx)
    A, omega = op.interaction_matrix(dom, TailModel.const(0.0))
    assert A.shape == (dom.interior_count, dom.interior_count)
    assert np.array_equal(omega, np.flatnonzero(dom.omega_mask.ravel()))
    d = np.diag(A)
    off = A - np.diag(d)
    assert np.all(d > 0)
    assert np.all(off <= 0)
    # strict diagonal dominance: row sums bounded below by the exterior weight
    assert np.all(A.sum(axis=1) > 0)
    assert np.allclose(A, A.T, rtol=1e-12)


def test_interaction_matrix_reproduces_apply(ctx1d, op1d, dom1d, rng):
    u_vals = np.where(dom1d.omega_mask, rng.standard_normal(ctx1d.shape), 0.0)
    u = GridFunction(ctx1d, u_vals, tail=TailModel.const(0.0))
    A, omega = op1d.interaction_matrix(dom1d, TailModel.const(0.0))
    direct = op1d.apply_all(u).values.ravel()[omega]
    via_matrix = A @ u_vals.ravel()[omega]
    assert np.allclose(direct, via_matrix, rtol=1e-11, atol=1e-11)


def test_interaction_matrix_rejects_huge_interiors():
    # ~6000 interior nodes -> 3.6e7 dense entries, past the guard
    h = 1.0 / 3000.0
    ctx, dom = build_context(1, 0.25, h, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    op = FracOperator(ctx)
    with pytest.raises(ValueError):
        op.interaction_matrix(dom, TailModel.const(0.0))


# ---------------------------------------------------------------------------
# refinement and dumps


def test_refinement_stability():
    # halving h must move pointwise values by O(h^(2-2s)), i.e. the coarse and
    # fine answers agree and the difference shrinks
    s, R = 0.25, 8.0
    vals = []
    for h in (0.04, 0.02, 0.01):
        ctx, _ = build_context(1, s, h, R, {"type": "interval", "a": -1.0, "b": 1.0})
        op = FracOperator(ctx)
        u = grid_function_from_callable(
            ctx, lambda x: np.tanh(2 * x), tail=TailModel.split(0.0, -1.0, 1.0)
        )
        # x = 0.24 is a node at every resolution used, so all three probes
        # see the same physical point
        vals.append(op.apply_pointwise(u, (0.24,)))
    d1, d2 = abs(vals[1] - vals[0]), abs(vals[2] - vals[1])
    assert d2 < d1 < 5e-3
    # observed order ~ 2 - 2s
    order = np.log2(d1 / d2)
    assert 1.0 < order < 2.5


def test_stencil_dump_structure(op1d, op2d, ctx1d):
    d = op1d.stencil_dump(count=6)
    assert d["n"] == 1 and d["s"] == 0.25 and d["h"] == ctx1d.h
    pw = np.asarray(d["pair_weights"])
    assert pw.shape == (7,)
    assert pw[0] == 0.0 and np.all(pw[1:] > 0)
    assert d["tail_weight_center"] > 0
    d2 = op2d.stencil_dump(count=4)
    pw2 = np.asarray(d2["pair_weights"])
    assert pw2.shape == (5, 5)
    assert np.allclose(pw2, pw2.T)


@given(c=st.floats(min_value=-5, max_value=5), seed=st.integers(0, 2**16))
@settings(max_examples=20, deadline=None)
def test_shift_by_constant_property(c, seed):
    # L(u + c) = L(u) when the tail shifts along: kernel of the operator
    ctx, _ = build_context(1, 0.2, 0.05, 4.0, {"type": "interval", "a": -1.0, "b": 1.0})
    op = FracOperator(ctx)
    rng = np.random.default_rng(seed)
    base = rng.standard_normal(ctx.shape)
    u = GridFunction(ctx, base, tail=TailModel.const(0.0))
    v = GridFunction(ctx, base + c, tail=TailModel.const(c))
    assert np.allclose(op.apply_raw(u), op.apply_raw(v), atol=1e-10)
