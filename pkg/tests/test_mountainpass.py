import warnings

import numpy as np
import pytest

from vkdshell.descent import rescale_to_manifold
from vkdshell.errors import DegeneratePath, MaxIterations, ValidationError
from vkdshell.mountainpass import MpConfig, MpStatus, cmpa_run, init_path, mpa_run
from vkdshell.pipelines import basin_point
from vkdshell.seeds import bump


@pytest.fixture(scope="module")
def mpa_result(small_problem):
    ctx, _ = small_problem
    w2 = basin_point(ctx, 1.4).w
    path = init_path(np.zeros(ctx.grid.size), w2, 20, ctx, lam=1.4)
    ends = (path.points[0], path.points[-1])
    copies = (ends[0].copy(), ends[1].copy())
    cp = mpa_run(path, 1.4, MpConfig(p=20, tol=1e-5), ctx)
    return ctx, path, ends, copies, cp, w2


def test_mpa_converges_to_the_newton_solution(mpa_result, small_problem):
    ctx, _, _, _, cp, _ = mpa_result
    ref = small_problem[1]
    assert cp.status == MpStatus.CONVERGED.value
    assert abs(cp.E - ref.E) / ref.E < 1e-5
    assert abs(cp.S - ref.S) / ref.S < 1e-5
    st = ctx.state(cp.w, cp.lam)
    assert np.max(np.abs(st.dF)) < 1e-4


def test_mpa_path_maximum_never_rises_during_deformation(mpa_result):
    hist = mpa_result[4].history
    for it, before, gn, m, step, after in hist[:-1]:
        assert after <= before + 1e-12 * abs(before)


def test_mpa_endpoints_are_untouched(mpa_result):
    _, path, ends, copies, _, _ = mpa_result
    assert path.points[0] is ends[0] and path.points[-1] is ends[-1]
    for e, c in zip(ends, copies):
        assert np.array_equal(e, c)


def test_mountain_pass_level_lies_above_both_endpoints(mpa_result):
    ctx, _, _, _, cp, w2 = mpa_result
    assert cp.F > 0.0 > ctx.evaluate(w2, 1.4).F


def test_positive_endpoint_warns(small_problem):
    ctx, _ = small_problem
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        init_path(np.zeros(ctx.grid.size), bump(ctx.grid, 0.1, 5.0), 4, ctx, lam=1.4)
    assert any("mountain-pass" in str(r.message) for r in rec)


def test_path_validation(small_problem):
    ctx, _ = small_problem
    z = np.zeros(ctx.grid.size)
    with pytest.raises(ValidationError):
        init_path(z, z, 1, ctx)
    with pytest.raises(ValidationError):
        MpConfig(step=0.0)
    with pytest.raises(ValidationError):
        init_path(bump(ctx.grid), bump(ctx.grid, 2.0), 4, ctx, C=10.0)
    with pytest.raises(DegeneratePath):
        mpa_run(init_path(z, z, 4, ctx), 1.4, MpConfig(p=4), ctx)


def test_iteration_cap(mpa_result):
    ctx, _, _, _, _, w2 = mpa_result
    path = init_path(np.zeros(ctx.grid.size), w2, 10, ctx, lam=1.4)
    cp = mpa_run(path, 1.4, MpConfig(p=10, max_deform=3), ctx)
    assert cp.status == MpStatus.ITERATION_CAP.value and cp.iterations == 3
    with pytest.raises(MaxIterations):
        mpa_run(init_path(np.zeros(ctx.grid.size), w2, 10, ctx, lam=1.4), 1.4, MpConfig(p=10, max_deform=3, raise_on_cap=True), ctx)


def test_cmpa_keeps_every_point_on_the_manifold(small_problem):
    ctx, _ = small_problem
    C = 15.0
    w1 = rescale_to_manifold(bump(ctx.grid, 1.0, 6.0), C, ctx)
    w2 = rescale_to_manifold(bump(ctx.grid, 1.0, 6.0, centre=(0.0, -15.0)), C, ctx)
    path = init_path(w1, w2, 12, ctx, C=C)
    seen = []

    def cb(it, p, m, vals, gn, step):
        seen.append(max(abs(ctx.shortening(z) - C) for z in p.points))

    cp = cmpa_run(path, C, MpConfig(p=12, max_deform=60), ctx, cb)
    assert max(seen) <= 1e-10 * C
    assert abs(cp.S - C) <= 1e-10 * C
    assert path.points[0] is w1 and path.points[-1] is w2
    for it, before, gn, m, step, after in cp.history[:-1]:
        assert after <= before + 1e-12 * abs(before)
    with pytest.raises(ValidationError):
        cmpa_run(path, 2 * C, MpConfig(p=12), ctx)


def test_basin_point_enlarges_a_seed_that_falls_back_to_zero(small_problem):
    from vkdshell.errors import SolverError
    from vkdshell.pipelines import SeedConfig

    ctx, _ = small_problem
    weak = SeedConfig(amplitude=1.0, radius=3.0)
    with pytest.raises(SolverError):
        basin_point(ctx, 1.4, weak, retries=0)
    res = basin_point(ctx, 1.4, weak, retries=6)
    assert res.functionals.F < 0
