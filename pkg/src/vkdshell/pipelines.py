"""End-to-end experiment pipelines shared by the CLI, the scripts and the acceptance tests."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .descent import FlowConfig, FlowStatus, csdm_run, sdm_run
from .errors import SolverError, ValidationError
from .grid import Boundary, GridSpec, Scheme, grid_from_step
from .model import Functionals, ModelContext
from .mountainpass import CriticalPoint, MpConfig, cmpa_run, init_path, mpa_run
from .newton import ContinuationConfig, continuation_run, newton_fixed_load, newton_fixed_shortening
from .seeds import bump

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProblemConfig:
    a: float = 100.0
    b: float = 100.0
    dx: float = 0.5
    dy: float | None = None
    boundary: str = "quarter"
    scheme: str = "left"

    def grid(self) -> GridSpec:
        return grid_from_step(self.a, self.b, self.dx, self.dy, self.boundary, self.scheme)

    def context(self) -> ModelContext:
        return ModelContext(self.grid())


@dataclass
class SeedConfig:
    """Raised-cosine dimple placed at the symmetry corner (the middle of the full domain)."""

    amplitude: float = 8.0
    radius: float = 5.0
    centre: tuple = (0.0, 0.0)

    def field(self, grid: GridSpec) -> np.ndarray:
        return bump(grid, self.amplitude, self.radius, self.centre)


# Largest field size (cells) polished by the sparse LU; the fill of a 400 x 400
# quarter grid does not fit in 5 GB.
DIRECT_SOLVE_LIMIT = 100_000


def newton_capable(ctx: ModelContext) -> bool:
    return ctx.grid.scheme is not Scheme.SPECTRAL and ctx.grid.boundary is Boundary.QUARTER


def _polishable(ctx: ModelContext) -> bool:
    if not newton_capable(ctx):
        return False
    if ctx.grid.size > DIRECT_SOLVE_LIMIT:
        log.warning("%d cells exceed the direct-solve limit %d; keeping the variational result", ctx.grid.size, DIRECT_SOLVE_LIMIT)
        return False
    return True


def basin_point(ctx: ModelContext, lam: float, seed: SeedConfig | None = None, max_iter: int = 5000, callback=None, retries: int = 3):
    """Second MPA endpoint: descend from a dimple seed until F_lambda < 0.

    Smaller loads need wider, deeper dimples; when the descent falls back to zero
    the seed is enlarged by 1.5 in amplitude and radius, up to ``retries`` times.
    """
    seed = seed or SeedConfig()
    cfg = FlowConfig(stop_on_negative=True, max_iter=max_iter)
    for attempt in range(retries + 1):
        res = sdm_run(seed.field(ctx.grid), lam, cfg, ctx, callback)
        if res.status is FlowStatus.NEGATIVE_POTENTIAL:
            return res
        if res.status is not FlowStatus.CONVERGED_TO_ZERO:
            break
        log.info("seed (%.3g, %.3g) fell back to zero; enlarging", seed.amplitude, seed.radius)
        seed = SeedConfig(1.5 * seed.amplitude, 1.5 * seed.radius, seed.centre)
    raise SolverError(f"descent from the seed did not reach F < 0 (status {res.status.value}, F = {res.functionals.F:.4g})")


def polish_fixed_load(ctx, cp: CriticalPoint, tol=1e-10) -> CriticalPoint:
    if not _polishable(ctx):
        return cp
    try:
        return newton_fixed_load(cp.w, cp.phi, cp.lam, ctx, tol=tol)
    except SolverError as exc:
        log.warning("Newton polish failed (%s); keeping the variational result", exc.name)
        return cp


def polish_fixed_shortening(ctx, cp: CriticalPoint, C, tol=1e-10) -> CriticalPoint:
    if not _polishable(ctx):
        return cp
    try:
        return newton_fixed_shortening(cp.w, cp.phi, cp.lam, C, ctx, tol=tol)
    except SolverError as exc:
        log.warning("fixed-S Newton polish failed (%s); keeping the variational result", exc.name)
        return cp


def mountain_pass(
    ctx: ModelContext,
    lam: float,
    w2=None,
    seed: SeedConfig | None = None,
    mp: MpConfig | None = None,
    polish: bool = True,
    callback=None,
) -> CriticalPoint:
    """SDM endpoint search, MPA from w1 = 0, then (when the operator is sparse) Newton polish."""
    if not 0.0 < lam < 2.0:
        raise ValidationError(f"load must lie in (0, 2), got {lam}")
    mp = mp or MpConfig()
    if w2 is None:
        w2 = basin_point(ctx, lam, seed).w
    path = init_path(np.zeros(ctx.grid.size), w2, mp.p, ctx, lam=lam)
    cp = mpa_run(path, lam, mp, ctx, callback)
    return polish_fixed_load(ctx, cp) if polish else cp


def constrained_minimizer(ctx, C, w0, flow: FlowConfig | None = None, polish=True, callback=None) -> CriticalPoint:
    flow = flow or FlowConfig(tol=1e-3, max_iter=20_000)
    res = csdm_run(w0, C, flow, ctx, callback)
    st = ctx.state(res.w, res.lam)
    cp = CriticalPoint(
        w=res.w,
        phi=st.phi,
        lam=res.lam,
        functionals=res.functionals,
        norm_X_sq=ctx.norm_X_squared(res.w),
        method="CSDM",
        iterations=res.iterations,
        residual=res.grad_norm,
        status=res.status.value,
        history=res.history,
    )
    return polish_fixed_shortening(ctx, cp, C) if polish else cp


def constrained_mountain_pass(ctx, C, w1, w2, mp: MpConfig | None = None, polish=True, callback=None) -> CriticalPoint:
    mp = mp or MpConfig()
    path = init_path(w1, w2, mp.p, ctx, C=C)
    cp = cmpa_run(path, C, mp, ctx, callback)
    return polish_fixed_shortening(ctx, cp, C) if polish else cp


# -- studies -----------------------------------------------------------------------

BIAS_CASES = (("full", "spectral"), ("full", "left"), ("quarter", "left"), ("quarter", "right"))


@dataclass
class StudyRow:
    label: str
    lam: float
    S: float
    E: float
    F: float
    extra: dict = field(default_factory=dict)

    @classmethod
    def of(cls, label, f: Functionals, **extra):
        return cls(label, f.lam, f.S, f.E, f.F, extra)

    def row(self):
        return (self.label, self.lam, self.S, self.E, self.F)


def circumferential_profile(w, grid: GridSpec):
    """``(y, w(0, y))``; on the full domain x = 0 lies between two cell columns."""
    W = w.reshape(grid.shape)
    if grid.quarter:
        return grid.y, W[:, -1].copy()
    j = grid.M // 2
    prof = W[:, j] if grid.M % 2 else 0.5 * (W[:, j - 1] + W[:, j])
    return grid.y, prof


def profile_asymmetry(w, grid: GridSpec) -> float:
    """Relative deviation from ``w(0, y) = w(0, -y)``, full domain only."""
    _, p = circumferential_profile(w, grid)
    return float(np.max(np.abs(p - p[::-1])) / max(np.max(np.abs(p)), 1e-300))


def study_bias(a=100.0, b=100.0, dx=0.5, lam=1.4, cases=BIAS_CASES, mp=None, seed=None, polish=True, progress=None):
    rows, profiles = [], {}
    for boundary, scheme in cases:
        ctx = ProblemConfig(a, b, dx, None, boundary, scheme).context()
        cp = mountain_pass(ctx, lam, seed=seed, mp=mp, polish=polish)
        row = StudyRow.of(f"{boundary}/{scheme}", cp.functionals, method=cp.method)
        if boundary == "full":
            row.extra["profile_asymmetry"] = profile_asymmetry(cp.w, ctx.grid)
        rows.append(row)
        profiles[row.label] = circumferential_profile(cp.w, ctx.grid)
        if progress:
            progress(row)
    return rows, profiles


def study_convergence(a=50.0, b=50.0, steps=(0.5, 0.4, 0.3), lam=1.4, mp=None, seed=None, polish=True, progress=None):
    """Per step size: sup-norm distance of the one-sided solutions to the transform-based one, and S for each."""
    out = []
    for dx in steps:
        sols = {}
        for scheme in ("left", "right", "spectral"):
            ctx = ProblemConfig(a, b, dx, None, "quarter", scheme).context()
            sols[scheme] = mountain_pass(ctx, lam, seed=seed, mp=mp, polish=polish)
        cs = sols["spectral"].w
        row = {
            "dx": ctx.grid.dx,
            "diff_left": float(np.max(np.abs(sols["left"].w - cs))),
            "diff_right": float(np.max(np.abs(sols["right"].w - cs))),
            "S_left": sols["left"].S,
            "S_right": sols["right"].S,
            "S_spectral": sols["spectral"].S,
        }
        out.append(row)
        if progress:
            progress(row)
    return out


def restrict_to(w, big: GridSpec, small: GridSpec):
    """Samples of a quarter-domain field on the corner sub-box covered by ``small`` (same mesh width)."""
    if not (np.isclose(big.dx, small.dx) and np.isclose(big.dy, small.dy)):
        raise ValidationError("restriction needs equal mesh widths")
    W = w.reshape(big.shape)
    return W[big.N - small.N :, big.M - small.M :].ravel()


def second_derivative_differences(w, grid: GridSpec, w_ref, grid_ref: GridSpec):
    """Relative sup-norm differences of w_xx and w_yy against a reference on a larger quarter domain."""
    o, o_ref = grid.ops, grid_ref.ops
    xx_ref = restrict_to(o_ref.axx(w_ref), grid_ref, grid)
    yy_ref = restrict_to(o_ref.ayy(w_ref), grid_ref, grid)
    full_xx = np.max(np.abs(o_ref.axx(w_ref)))
    full_yy = np.max(np.abs(o_ref.ayy(w_ref)))
    return {
        "rel_xx": float(np.max(np.abs(o.axx(w) - xx_ref)) / full_xx),
        "rel_yy": float(np.max(np.abs(o.ayy(w) - yy_ref)) / full_yy),
        "ref_xx": float(full_xx),
        "ref_yy": float(full_yy),
    }


def study_domain(
    sizes=((100.0, 100.0), (100.0, 200.0), (200.0, 100.0)),
    reference=(200.0, 200.0),
    dx=0.5,
    lam=1.4,
    scheme="left",
    mp=None,
    seed=None,
    polish=True,
    progress=None,
):
    ref_ctx = ProblemConfig(*reference, dx, None, "quarter", scheme).context()
    ref = mountain_pass(ref_ctx, lam, seed=seed, mp=mp, polish=polish)
    rows = []
    for a, b in sizes:
        if (a, b) == tuple(reference):
            cp, ctx = ref, ref_ctx
        else:
            ctx = ProblemConfig(a, b, dx, None, "quarter", scheme).context()
            cp = mountain_pass(ctx, lam, seed=seed, mp=mp, polish=polish)
        d = second_derivative_differences(cp.w, ctx.grid, ref.w, ref_ctx.grid)
        row = {"a": a, "b": b, "E": cp.E, "S": cp.S, **d}
        rows.append(row)
        if progress:
            progress(row)
    return rows


def branch_from(
    ctx,
    start: CriticalPoint,
    s_max,
    ds=0.5,
    direction=-1,
    theta=0.5,
    cfg=None,
    lam_bounds=(0.05, 1.95),
    callback=None,
    stop_after_fold=False,
):
    """Continuation from ``start``; with ``stop_after_fold`` the run ends two points past the first turning point in lambda."""
    seen = []

    def watch(bp):
        seen.append(bp.lam)
        stop = bool(callback(bp)) if callback is not None else False
        if stop_after_fold and len(seen) >= 3:
            k = _fold_index([start.lam, *seen])
            stop = stop or (k is not None and len(seen) + 1 - k > 2)
        return stop

    return continuation_run(start, s_max, ds, ctx, theta=theta, direction=direction, cfg=cfg or ContinuationConfig(), lam_bounds=lam_bounds, callback=watch)



def find_fold(branch):
    """First interior local minimum of lambda along the branch, or None."""
    return _fold_index([p.lam for p in branch])


def _fold_index(lam):
    for k in range(1, len(lam) - 1):
        if lam[k] < lam[k - 1] and lam[k] <= lam[k + 1]:
            return k
    return None


def branch_value_at(ctx, branch, lam, upto=None):
    """Refine the first branch crossing of ``lam`` (before index ``upto``) by fixed-load Newton."""
    pts = branch[: upto + 1] if upto is not None else branch
    for p, q in zip(pts, pts[1:]):
        if (p.lam - lam) * (q.lam - lam) <= 0:
            near = p if abs(p.lam - lam) <= abs(q.lam - lam) else q
            return newton_fixed_load(near.w, near.phi, lam, ctx)
    return None
