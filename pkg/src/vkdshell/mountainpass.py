"""Mountain-pass algorithm on F_lambda and its constrained variant on E at fixed S."""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .descent import constrained_direction, rescale_to_manifold
from .errors import DegeneratePath, MaxIterations, ValidationError
from .model import Functionals, ModelContext

log = logging.getLogger(__name__)


class MpStatus(str, enum.Enum):
    CONVERGED = "Converged"
    STALLED = "StalledNearCriticalPoint"
    ITERATION_CAP = "IterationCap"


@dataclass
class MpConfig:
    p: int = 40
    step: float = 0.1
    tol: float = 1e-6
    max_deform: int = 20_000
    # arc-length redistribution every k deformations; 0 disables.  Off by default:
    # re-sampling a curved path lifts its maximum, so local refinement is used instead
    redistribute_every: int = 0
    grow: float = 1.5
    grow_after: int = 5
    min_step: float = 1e-12
    # insert points around the maximiser when the path is too coarse there
    refine: bool = True
    max_points: int = 400
    refine_every: int = 5
    max_step_fraction: float = 0.5
    stall_window: int = 0  # >0: stop as stalled if grad norm hasn't improved for this many steps
    raise_on_cap: bool = False

    def __post_init__(self):
        if self.p < 2 or not self.step > 0:
            raise ValidationError("MpConfig needs p >= 2 and step > 0")


@dataclass
class Path:
    points: list
    C: float | None = None

    @property
    def p(self) -> int:
        return len(self.points) - 1

    def copy(self) -> "Path":
        return Path([z for z in self.points], self.C)


@dataclass
class CriticalPoint:
    w: np.ndarray
    phi: np.ndarray
    lam: float
    functionals: Functionals
    norm_X_sq: float
    method: str
    iterations: int
    residual: float
    status: str = "Converged"
    history: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)  # Newton corrections, sup norm

    @property
    def E(self):
        return self.functionals.E

    @property
    def S(self):
        return self.functionals.S

    @property
    def F(self):
        return self.functionals.F


def init_path(w1, w2, p: int, ctx: ModelContext, C: float | None = None, lam: float | None = None) -> Path:
    """Straight path ``z_m = (1 - m/p) w1 + (m/p) w2``; with ``C`` every interior point is rescaled onto S = C."""
    if p < 2:
        raise ValidationError("a path needs p >= 2 segments")
    w1 = ctx.grid.check(w1)
    w2 = ctx.grid.check(w2)
    if C is not None:
        for w in (w1, w2):
            S = ctx.shortening(w)
            if abs(S - C) > 1e-8 * C:
                raise ValidationError(f"endpoint has S = {S}, not on the manifold S = {C}")
    elif lam is not None:
        F2 = ctx.evaluate(w2, lam).F
        if F2 >= 0:
            warnings.warn(f"F_lambda(w2) = {F2:.4g} >= 0; the mountain-pass geometry is not guaranteed")
    pts = [w1]
    for m in range(1, p):
        t = m / p
        z = (1.0 - t) * w1 + t * w2
        if C is not None:
            z = rescale_to_manifold(z, C, ctx)
        pts.append(z)
    pts.append(w2)
    return Path(pts, C)


class _Objective:
    """F_lambda with the X,lambda gradient (MPA) or E with the projected X gradient (CMPA)."""

    def __init__(self, ctx: ModelContext, lam: float | None, C: float | None):
        self.ctx, self.lam, self.C = ctx, lam, C

    def value(self, z):
        st = self.ctx.state(z, self.lam or 0.0)
        return st.F if self.C is None else st.E

    def direction(self, z):
        """Return ``(unit descent direction, gradient norm, load)``, the state's norm metric."""
        st = self.ctx.state(z, self.lam or 0.0)
        if self.C is None:
            g, gn, lam = st.grad_F_lam, st.grad_F_lam_norm, self.lam
        else:
            g, gn, lam = constrained_direction(self.ctx, st)
        return g, gn, lam

    def move(self, z, g, gn, step):
        z_new = z - (step / gn) * g
        if self.C is not None:
            z_new = rescale_to_manifold(z_new, self.C, self.ctx)
        return z_new

    def norm(self, u):
        lam = self.lam if self.C is None else 0.0
        return np.sqrt(max(self.ctx.inner_X(u, u, lam), 0.0))


def _redistribute(path: Path, obj: _Objective, n_points: int, C):
    pts = path.points
    seg = np.array([obj.norm(pts[i + 1] - pts[i]) for i in range(len(pts) - 1)])
    total = seg.sum()
    if total == 0.0:
        raise DegeneratePath("path has zero length")
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = np.linspace(0.0, total, n_points)
    new = [pts[0]]
    for t in targets[1:-1]:
        k = min(np.searchsorted(s, t, side="right") - 1, len(seg) - 1)
        frac = (t - s[k]) / seg[k] if seg[k] > 0 else 0.0
        z = (1.0 - frac) * pts[k] + frac * pts[k + 1]
        if C is not None:
            z = rescale_to_manifold(z, C, obj.ctx)
        new.append(z)
    new.append(pts[-1])
    path.points = new


def _refine_around(path: Path, m: int, obj: _Objective, C):
    """Bisect the two segments adjacent to the interior point ``m``."""
    pts = path.points
    left = 0.5 * (pts[m - 1] + pts[m])
    right = 0.5 * (pts[m] + pts[m + 1])
    if C is not None:
        left = rescale_to_manifold(left, C, obj.ctx)
        right = rescale_to_manifold(right, C, obj.ctx)
    path.points = pts[:m] + [left, pts[m], right] + pts[m + 1 :]


def _run(path: Path, obj: _Objective, cfg: MpConfig, method: str, callback=None) -> CriticalPoint:
    ctx = obj.ctx
    pts = path.points
    if len(pts) < 3:
        raise DegeneratePath("path has no interior points")
    w_start, w_end = pts[0], pts[-1]
    vals = np.array([obj.value(z) for z in pts])
    step = cfg.step
    history = []
    accepted = 0
    best_gn = np.inf
    since_best = 0
    status = MpStatus.ITERATION_CAP
    gn, lam = np.inf, obj.lam
    it = 0
    for it in range(cfg.max_deform + 1):
        interior = vals[1:-1]
        m = 1 + int(np.argmax(interior))  # smallest index wins ties
        if vals[m] <= max(vals[0], vals[-1]) and np.allclose(interior, vals[m]):
            raise DegeneratePath("path is flat: no interior maximum above the endpoints")
        z = pts[m]
        g, gn, lam = obj.direction(z)
        # (iteration, path max, |grad|, argmax, step, path max after this deformation)
        history.append([it, float(vals[m]), float(gn), m, step, float(vals[m])])
        if callback is not None:
            callback(it, path, m, vals, gn, step)
        if gn <= cfg.tol:
            status = MpStatus.CONVERGED
            break
        if it == cfg.max_deform:
            break
        if gn < best_gn * (1.0 - 1e-3):
            best_gn, since_best = gn, 0
        else:
            since_best += 1
            if cfg.stall_window and since_best >= cfg.stall_window:
                status = MpStatus.STALLED
                break
        # single-point deformation with step halving until the maximum drops;
        # the step never exceeds half the distance to a neighbour so the path cannot tear
        seg = min(obj.norm(z - pts[m - 1]), obj.norm(pts[m + 1] - z))
        step = min(step, cfg.max_step_fraction * seg)
        while True:
            z_new = obj.move(z, g, gn, step)
            v_new = obj.value(z_new)
            if v_new < vals[m]:
                break
            step *= 0.5
            accepted = 0
            if step < cfg.min_step:
                break
        if not v_new < vals[m]:
            # no descent even for a vanishing step: numerically at a critical point
            status = MpStatus.STALLED
            break
        pts[m] = z_new
        vals[m] = v_new
        history[-1][5] = float(np.max(vals[1:-1]))
        accepted += 1
        if accepted >= cfg.grow_after:
            step *= cfg.grow
            accepted = 0
        if cfg.redistribute_every and (it + 1) % cfg.redistribute_every == 0:
            _redistribute(path, obj, len(pts), path.C)
            pts = path.points
            vals = np.array([obj.value(z) for z in pts])
        elif cfg.refine and len(pts) < cfg.max_points and it % cfg.refine_every == 0:
            # the polygon may rise above its highest vertex next to the maximiser
            j = int(np.argmax(vals[1:-1])) + 1
            for k in (j, j - 1):
                mid = 0.5 * (pts[k] + pts[k + 1])
                if path.C is not None:
                    mid = rescale_to_manifold(mid, path.C, ctx)
                v_mid = obj.value(mid)
                if v_mid > vals[j]:
                    pts.insert(k + 1, mid)
                    vals = np.insert(vals, k + 1, v_mid)
                    break
    assert pts[0] is w_start and pts[-1] is w_end
    if status is not MpStatus.CONVERGED and cfg.raise_on_cap and status is MpStatus.ITERATION_CAP:
        raise MaxIterations(f"{method} did not converge in {cfg.max_deform} deformations (|grad| = {gn:.3e})")
    interior = vals[1:-1]
    m = 1 + int(np.argmax(interior))
    z = pts[m]
    st = ctx.state(z, lam)
    func = Functionals.of(st.E, st.S, lam)
    return CriticalPoint(
        w=z,
        phi=st.phi,
        lam=float(lam),
        functionals=func,
        norm_X_sq=ctx.norm_X_squared(z),
        method=method,
        iterations=it,
        residual=float(gn),
        status=status.value,
        history=[tuple(h) for h in history],
    )


def mpa_run(path: Path, lam: float, cfg: MpConfig, ctx: ModelContext, callback=None) -> CriticalPoint:
    if not 0.0 < lam < 2.0:
        raise ValidationError(f"load must lie in (0, 2), got {lam}")
    return _run(path, _Objective(ctx, lam, None), cfg, "MPA", callback)


def cmpa_run(path: Path, C: float, cfg: MpConfig, ctx: ModelContext, callback=None) -> CriticalPoint:
    if path.C is None or abs(path.C - C) > 1e-12 * C:
        raise ValidationError("CMPA path must be built on the manifold S = C")
    return _run(path, _Objective(ctx, None, C), cfg, "CMPA", callback)
