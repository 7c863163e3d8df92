import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from vkdshell.descent import lagrange_load
from vkdshell.errors import (
    Diverged,
    MaxIterations,
    NonZeroMeanRightHandSide,
    UnsupportedDomain,
    UnsupportedScheme,
    ValidationError,
)
from vkdshell.grid import GridSpec
from vkdshell.model import ModelContext
from vkdshell.newton import (
    ContinuationState,
    arclength_residual,
    assemble_jacobian,
    continuation_run,
    continuation_step,
    convergence_order,
    initial_state,
    newton_fixed_load,
    newton_fixed_shortening,
    shortening_constraint,
    solve_reduced,
)
from vkdshell.seeds import bump

from .conftest import random_field

tiny = st.builds(
    lambda M, N, scheme: ModelContext(GridSpec(3.0, 2.5, M, N, "quarter", scheme)),
    st.integers(3, 5),
    st.integers(3, 5),
    st.sampled_from(["left", "right"]),
)


def _G(ctx, w, phi, lam):
    return np.concatenate(ctx.residual_fixed_load(w, phi, lam))


@given(tiny, st.integers(0, 2**32 - 1), st.floats(0.2, 1.9))
def test_jacobian_matches_directional_differences(ctx, seed, lam):
    r = np.random.default_rng(seed)
    n = ctx.grid.size
    w, phi, v, z = (random_field(r, ctx.grid) for _ in range(4))
    jac = assemble_jacobian(w, phi, lam, ctx)
    eps = 1e-6
    fd = (_G(ctx, w + eps * v, phi + eps * z, lam) - _G(ctx, w - eps * v, phi - eps * z, lam)) / (2 * eps)
    an = jac.matrix @ np.concatenate([v, z])
    assert np.max(np.abs(fd - an)) <= 1e-6 * np.max(np.abs(an))
    K = jac.matrix
    assert abs(K - K.T).max() == 0.0
    ones, zeros = np.ones(n), np.zeros(n)
    scale = abs(K).max()
    assert np.max(np.abs(K @ np.concatenate([ones, zeros]))) <= 1e-12 * scale
    assert np.max(np.abs(K @ np.concatenate([zeros, ones]))) <= 1e-12 * scale


def test_jacobian_at_zero_is_the_linear_operator():
    ctx = ModelContext(GridSpec(3.0, 2.5, 4, 4))
    n = ctx.grid.size
    S = ctx.ops.sparse
    jac = assemble_jacobian(np.zeros(n), np.zeros(n), 1.3, ctx)
    expected = sp.bmat([[S["ABiharm"] - 1.3 * S["Axx"], S["Axx"]], [S["Axx"], -S["ABiharm"]]])
    assert abs(jac.matrix - expected).max() < 1e-12


@given(tiny, st.integers(0, 2**32 - 1))
def test_B2_transpose_is_the_bilinear_bracket(ctx, seed):
    r = np.random.default_rng(seed)
    w, h, phi = (r.standard_normal(ctx.grid.size) for _ in range(3))
    # d[w,w]_2/dw h = 2 [w,h]_2, so B2^T h = [w,h]_2 and G12^T = Axx - 2 B2^T
    G12 = assemble_jacobian(w, phi, 1.0, ctx).G12
    B2h = 0.5 * (ctx.ops.sparse["Axx"] @ h - G12.T @ h)
    np.testing.assert_allclose(B2h, ctx.bracket_bilinear(w, h), atol=1e-10 * np.abs(B2h).max())


@given(tiny, st.integers(0, 2**32 - 1))
def test_reduced_solve_matches_pseudo_inverse(ctx, seed):
    r = np.random.default_rng(seed)
    n = ctx.grid.size
    w, phi = 0.3 * random_field(r, ctx.grid), 0.3 * random_field(r, ctx.grid)
    jac = assemble_jacobian(w, phi, 1.1, ctx)
    u, eta = random_field(r, ctx.grid), random_field(r, ctx.grid)
    v, zeta = solve_reduced(jac, u, eta)
    K = jac.matrix.toarray()
    ref = np.linalg.pinv(K) @ np.concatenate([u, eta])
    # the pseudo-inverse solution is the one orthogonal to the nullspace, i.e. zero-mean blocks
    np.testing.assert_allclose(np.concatenate([v, zeta]), ref, atol=1e-9 * np.abs(ref).max())
    back = K @ np.concatenate([v, zeta])
    np.testing.assert_allclose(back, np.concatenate([u, eta]), atol=1e-9 * np.abs(np.concatenate([u, eta])).max())
    assert abs(v.sum()) <= 1e-12 * n * np.abs(v).max()
    assert abs(zeta.sum()) <= 1e-12 * n * np.abs(zeta).max()


def test_reduced_solve_trivial_and_invalid():
    ctx = ModelContext(GridSpec(3.0, 2.5, 4, 4))
    n = ctx.grid.size
    jac = assemble_jacobian(np.zeros(n), np.zeros(n), 1.0, ctx)
    v, z = solve_reduced(jac, np.zeros(n), np.zeros(n))
    assert not v.any() and not z.any()
    with pytest.raises(NonZeroMeanRightHandSide):
        solve_reduced(jac, np.ones(n), np.zeros(n))


def test_unsupported_settings():
    w = np.zeros(16)
    with pytest.raises(UnsupportedScheme):
        assemble_jacobian(w, w, 1.0, ModelContext(GridSpec(3.0, 3.0, 4, 4, "quarter", "spectral")))
    with pytest.raises(UnsupportedDomain):
        assemble_jacobian(w, w, 1.0, ModelContext(GridSpec(3.0, 3.0, 4, 4, "full", "left")))


def test_newton_returns_immediately_at_a_root(small_problem):
    ctx, cp = small_problem
    again = newton_fixed_load(cp.w, cp.phi, cp.lam, ctx)
    assert again.iterations == 0
    assert np.array_equal(again.w, cp.w - cp.w.mean())


def test_newton_converges_quadratically(small_problem):
    ctx, cp = small_problem
    start = cp.w + 0.2 * bump(ctx.grid, 1.0, 5.0)
    # a tolerance just above the roundoff floor keeps one more asymptotic step in the record
    res = newton_fixed_load(start, None, cp.lam, ctx, tol=1e-12)
    assert res.residual <= 1e-12
    assert abs(res.E - cp.E) <= 1e-9 * cp.E
    assert convergence_order(res.step_norms) >= 1.8


def test_newton_divergence_and_cap(small_problem):
    ctx, cp = small_problem
    with pytest.raises((Diverged, MaxIterations)):
        newton_fixed_load(40.0 * bump(ctx.grid, 1.0, 3.0), None, 1.4, ctx, max_iter=12)
    with pytest.raises(MaxIterations):
        newton_fixed_load(cp.w + 0.2 * bump(ctx.grid, 1.0, 5.0), None, cp.lam, ctx, max_iter=1)
    with pytest.raises(ValidationError):
        newton_fixed_load(cp.w, None, 2.0, ctx)


def test_fixed_shortening_newton(small_problem):
    ctx, cp = small_problem
    C = 1.02 * cp.S
    res = newton_fixed_shortening(1.01 * cp.w, None, 1.35, C, ctx)
    assert abs(res.S - C) <= 1e-10 * C
    assert abs(shortening_constraint(res.w, C, ctx)) <= 1e-10 * C / (2 * ctx.grid.energy_factor * ctx.grid.cell_area)
    assert abs(res.lam - lagrange_load(res.w, ctx)) <= 1e-8
    again = newton_fixed_shortening(res.w, res.phi, res.lam, C, ctx)
    assert again.iterations == 0 and again.lam == res.lam
    with pytest.raises(ValidationError):
        newton_fixed_shortening(cp.w, None, 1.4, -1.0, ctx)


@pytest.fixture(scope="module")
def short_branch(small_problem):
    ctx, cp = small_problem
    return continuation_run(cp, 3.0, 0.5, ctx)


def test_continuation_points_are_solutions(short_branch, small_problem):
    ctx, _ = small_problem
    assert len(short_branch) >= 4 and short_branch.error is None
    s = [p.s for p in short_branch]
    assert all(b > a for a, b in zip(s, s[1:]))
    for p in short_branch[1:]:
        g1, g2 = ctx.residual_fixed_load(p.w, p.phi, p.lam)
        assert max(np.abs(g1).max(), np.abs(g2).max()) <= 1e-9
        assert abs(p.arclength_residual) <= 1e-10
    # continued towards smaller loads, the dimple grows
    assert short_branch[-1].lam < short_branch[0].lam and short_branch[-1].E > short_branch[0].E


def test_continuation_direction_is_normalised(small_problem):
    ctx, cp = small_problem
    state = initial_state(cp, ctx, 0.5)
    n2 = state.theta * ctx.inner_X(state.w_dot0, state.w_dot0) + (1 - state.theta) * state.lam_dot0**2
    assert np.isclose(n2, 1.0, rtol=1e-10)
    with pytest.raises(ValidationError):
        ContinuationState(0.0, 1.4, cp.w, cp.phi, 1.0, cp.w, theta=1.0)


def test_tiny_step_returns_the_same_point(small_problem):
    ctx, cp = small_problem
    state = initial_state(cp, ctx, 1e-6)
    bp, nxt = continuation_step(state, ctx)
    assert abs(bp.lam - cp.lam) <= 2e-6
    assert abs(bp.E - cp.E) <= 1e-4 * cp.E
    assert abs(arclength_residual(ctx, state, bp.w, bp.lam, bp.s)) <= 1e-10
    assert nxt.s0 == bp.s > 0


def test_zero_length_range_echoes_start(small_problem):
    ctx, cp = small_problem
    br = continuation_run(cp, 0.0, 0.5, ctx)
    assert len(br) == 1 and br[0].lam == cp.lam and br[0].s == 0.0


def test_callback_can_stop_the_run(small_problem):
    ctx, cp = small_problem
    br = continuation_run(cp, 10.0, 0.5, ctx, callback=lambda bp: True)
    assert len(br) == 2
