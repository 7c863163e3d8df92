"""Newton refinement at fixed load and at fixed shortening, and pseudo-arclength continuation.

The Jacobian of (G1, G2) is symmetric with the constants ``[1; 0]`` and
``[0; 1]`` in its nullspace.  Linear solves drop the last row and column of
each block, factorise the remaining nonsingular sparse matrix, and shift the
result back onto the zero-mean subspace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    Diverged,
    MaxIterations,
    NonZeroMeanRightHandSide,
    SingularReducedSystem,
    StepFailure,
    UnsupportedDomain,
    UnsupportedScheme,
    ValidationError,
)
from .grid import Scheme
from .model import Functionals, ModelContext
from .mountainpass import CriticalPoint

log = logging.getLogger(__name__)


def _require_sparse_setting(ctx: ModelContext):
    if ctx.grid.scheme is Scheme.SPECTRAL:
        raise UnsupportedScheme("the transform-based mixed derivative gives a dense Jacobian block")
    if not ctx.grid.quarter:
        raise UnsupportedDomain("Newton solves need the quarter domain (y-shifts make the periodic Jacobian singular)")


@dataclass
class JacobianAssembly:
    G11: sp.csr_matrix
    G12: sp.csr_matrix
    G22: sp.csr_matrix
    n: int

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.bmat([[self.G11, self.G12], [self.G12.T, self.G22]], format="csr")

    @cached_property
    def _keep(self) -> np.ndarray:
        n = self.n
        keep = np.ones(2 * n, dtype=bool)
        keep[n - 1] = keep[2 * n - 1] = False
        return keep

    @cached_property
    def factor(self):
        K = self.matrix[self._keep][:, self._keep].tocsc()
        try:
            lu = spla.splu(K, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularReducedSystem(str(exc)) from exc
        d = np.abs(lu.U.diagonal())
        if not np.all(np.isfinite(d)) or d.min() <= 1e-14 * d.max():
            raise SingularReducedSystem("reduced Jacobian is numerically singular")
        return lu

    def apply(self, v, zeta):
        out = self.matrix @ np.concatenate([v, zeta])
        return out[: self.n], out[self.n :]


def _block_ops(ctx: ModelContext):
    S = ctx.ops.sparse
    return S["Axx"], S["Ayy"], S["Axy"], S["ABiharm"]


def _symmetrize(A):
    # products such as Axx D Ayy and its transpose round differently; average to make symmetry exact
    A = A.tocsr()
    return (0.5 * (A + A.T)).tocsr()


def assemble_jacobian(w, phi, lam: float, ctx: ModelContext) -> JacobianAssembly:
    """Sparse blocks of the Jacobian of (G1, G2) at (w, phi, lambda)."""
    _require_sparse_setting(ctx)
    Axx, Ayy, Axy, Abi = _block_ops(ctx)
    Dphi = sp.diags(phi)
    B1 = 0.5 * (Axx @ Dphi @ Ayy + Ayy @ Dphi @ Axx) - Axy.T @ Dphi @ Axy
    B2 = 0.5 * (Axx @ sp.diags(Ayy @ w) + Ayy @ sp.diags(Axx @ w)) - Axy.T @ sp.diags(Axy @ w)
    G11 = _symmetrize(Abi - lam * Axx - 2.0 * B1)
    G12 = (Axx - 2.0 * B2).tocsr()
    G22 = _symmetrize(-Abi)
    return JacobianAssembly(G11, G12, G22, ctx.grid.size)


def _check_mean(x, name, eps=1e-9):
    scale = max(np.max(np.abs(x)), 1e-300)
    if abs(x.sum()) > eps * x.size * scale:
        raise NonZeroMeanRightHandSide(f"{name} has nonzero mean ({x.sum():.3e})")


def solve_reduced(jac: JacobianAssembly, u, eta):
    """Zero-mean (v, zeta) with ``G' [v; zeta] = [u; eta]`` for zero-mean u, eta."""
    u = np.asarray(u, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _check_mean(u, "u")
    _check_mean(eta, "eta")
    n = jac.n
    rhs = np.concatenate([u, eta])[jac._keep]
    sol = jac.factor.solve(rhs)
    if not np.all(np.isfinite(sol)):
        raise SingularReducedSystem("reduced solve produced non-finite values")
    r, rho = sol[: n - 1], sol[n - 1 :]
    s = -r.sum() / n
    sigma = -rho.sum() / n
    v = np.concatenate([r + s, [s]])
    zeta = np.concatenate([rho + sigma, [sigma]])
    return v, zeta


def _project(x):
    return x - x.mean()


def _critical_point(ctx, w, phi, lam, method, iterations, residual, history, steps=(), status="Converged"):
    st = ctx.state(w, lam)
    return CriticalPoint(
        step_norms=list(steps),
        w=w,
        phi=phi,
        lam=float(lam),
        functionals=Functionals.of(st.E, st.S, lam),
        norm_X_sq=ctx.norm_X_squared(w),
        method=method,
        iterations=iterations,
        residual=float(residual),
        status=status,
        history=history,
    )


def convergence_order(seq, floor=1e-12):
    """Order estimate ``log(e3/e2) / log(e2/e1)`` from the last three entries above ``floor``."""
    e = [x for x in seq if x > floor]
    if len(e) < 3:
        return float("nan")
    e1, e2, e3 = e[-3:]
    return float(np.log(e3 / e2) / np.log(e2 / e1))


def _diverging(history, window=3):
    if len(history) < window + 1:
        return False
    tail = history[-(window + 1) :]
    return all(b > a for a, b in zip(tail, tail[1:]))


def newton_fixed_load(w0, phi0, lam: float, ctx: ModelContext, tol: float = 1e-10, max_iter: int = 30):
    """Full-step Newton on G(w, phi) = 0 for fixed load."""
    _require_sparse_setting(ctx)
    if not 0.0 < lam < 2.0:
        raise ValidationError(f"load must lie in (0, 2), got {lam}")
    w = _project(ctx.grid.check(w0))
    phi = ctx.compute_airy(w) if phi0 is None else _project(ctx.grid.check(phi0))
    history, steps = [], []
    for it in range(max_iter + 1):
        g1, g2 = ctx.residual_fixed_load(w, phi, lam)
        res = max(np.max(np.abs(g1)), np.max(np.abs(g2)))
        history.append(float(res))
        log.debug("newton(lambda=%g) it=%d residual=%.3e", lam, it, res)
        if res <= tol:
            return _critical_point(ctx, w, phi, lam, "Newton-lambda", it, res, history, steps)
        if it == max_iter:
            break
        if _diverging(history) or not np.isfinite(res):
            raise Diverged(f"Newton residual grew for 3 consecutive steps (last {res:.3e})")
        jac = assemble_jacobian(w, phi, lam, ctx)
        dv, dz = solve_reduced(jac, -_project(g1), -_project(g2))
        steps.append(float(max(np.max(np.abs(dv)), np.max(np.abs(dz)))))
        w = w + dv
        phi = phi + dz
    raise MaxIterations(f"Newton did not reach {tol:g} in {max_iter} steps (residual {history[-1]:.3e})")


def _bordered_solve(jac, g, h, d, u, eta_u, eta):
    """Solve ``[[G', g], [h^T, d]] [v; zeta] = [u; eta]`` with two reduced solves."""
    n = jac.n
    v1 = np.concatenate(solve_reduced(jac, g[:n], g[n:]))
    v2 = np.concatenate(solve_reduced(jac, u, eta_u))
    denom = d - h @ v1
    if denom == 0.0 or not np.isfinite(denom):
        raise SingularReducedSystem("bordered system is singular")
    zeta = (eta - h @ v2) / denom
    v = v2 - zeta * v1
    return v[:n], v[n:], zeta


def shortening_constraint(w, C, ctx: ModelContext):
    """``-1/2 w^T Axx w + C / (2 kappa dx dy)``; zero exactly when S(w) = C."""
    g = ctx.grid
    return -0.5 * float(w @ ctx.ops.axx(w)) + C / (2.0 * g.energy_factor * g.cell_area)


def newton_fixed_shortening(w0, phi0, lam0: float, C: float, ctx: ModelContext, tol: float = 1e-10, max_iter: int = 30):
    """Newton on (G1, G2, shortening constraint) for (w, phi, lambda)."""
    _require_sparse_setting(ctx)
    if not C > 0:
        raise ValidationError(f"shortening level must be positive, got {C}")
    n = ctx.grid.size
    w = _project(ctx.grid.check(w0))
    phi = ctx.compute_airy(w) if phi0 is None else _project(ctx.grid.check(phi0))
    lam = float(lam0)
    history, steps = [], []
    g3_scale = C / (2.0 * ctx.grid.energy_factor * ctx.grid.cell_area)
    for it in range(max_iter + 1):
        g1, g2 = ctx.residual_fixed_load(w, phi, lam)
        g3 = shortening_constraint(w, C, ctx)
        res = max(np.max(np.abs(g1)), np.max(np.abs(g2)))
        history.append(float(max(res, abs(g3) / g3_scale)))
        if res <= tol and abs(g3) <= tol * g3_scale:
            return _critical_point(ctx, w, phi, lam, "Newton-S", it, res, history, steps)
        if it == max_iter:
            break
        if _diverging(history) or not np.isfinite(res):
            raise Diverged(f"Newton residual grew for 3 consecutive steps (last {res:.3e})")
        jac = assemble_jacobian(w, phi, lam, ctx)
        gcol = np.concatenate([-ctx.ops.axx(w), np.zeros(n)])
        dv, dz, dl = _bordered_solve(jac, gcol, gcol, 0.0, -_project(g1), -_project(g2), -g3)
        steps.append(float(max(np.max(np.abs(dv)), np.max(np.abs(dz)), abs(dl))))
        w, phi, lam = w + dv, phi + dz, lam + dl
    raise MaxIterations(f"fixed-S Newton did not converge in {max_iter} steps (residual {history[-1]:.3e})")


# -- continuation ------------------------------------------------------------------


@dataclass
class BranchPoint:
    s: float
    lam: float
    norm_X_sq: float
    E: float
    S: float
    F: float
    w: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    newton_iterations: int = 0
    residual: float = 0.0
    arclength_residual: float = 0.0

    def row(self):
        return (self.s, self.lam, self.norm_X_sq, self.E, self.S, self.F)


@dataclass
class ContinuationState:
    s0: float
    lam0: float
    w0: np.ndarray
    phi0: np.ndarray
    lam_dot0: float
    w_dot0: np.ndarray
    theta: float = 0.5
    ds: float = 0.1

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValidationError("theta must lie in (0, 1)")


@dataclass
class ContinuationConfig:
    tol: float = 1e-10
    max_newton: int = 8
    ds_min: float = 1e-4
    ds_max: float = 2.0
    grow: float = 1.5
    fast_iterations: int = 3


def _weighted_norm2(ctx, theta, dw, dl):
    return theta * ctx.inner_X(dw, dw, 0.0) + (1.0 - theta) * dl * dl


def normalized_direction(ctx, theta, dw, dl):
    nrm = np.sqrt(_weighted_norm2(ctx, theta, dw, dl))
    if nrm == 0.0:
        raise ValidationError("zero branch direction")
    return dw / nrm, dl / nrm


def arclength_residual(ctx, state: ContinuationState, w, lam, s):
    th = state.theta
    return th * ctx.inner_X(state.w_dot0, w - state.w0) + (1.0 - th) * state.lam_dot0 * (lam - state.lam0) - (s - state.s0)


def _corrector(state: ContinuationState, ds: float, ctx: ModelContext, cfg: ContinuationConfig):
    n = ctx.grid.size
    th = state.theta
    s = state.s0 + ds
    w = state.w0 + ds * state.w_dot0
    lam = state.lam0 + ds * state.lam_dot0
    phi = ctx.compute_airy(w)
    # derivative of the arclength row with respect to w (phi and lambda enter separately)
    h = np.concatenate([th * ctx.pairing * ctx.apply_metric(state.w_dot0), np.zeros(n)])
    d = (1.0 - th) * state.lam_dot0
    history = []
    for it in range(cfg.max_newton + 1):
        g1, g2 = ctx.residual_fixed_load(w, phi, lam)
        g3 = arclength_residual(ctx, state, w, lam, s)
        res = max(np.max(np.abs(g1)), np.max(np.abs(g2)))
        history.append(res)
        if res <= cfg.tol and abs(g3) <= cfg.tol:
            st = ctx.state(w, lam)
            return BranchPoint(
                s=s,
                lam=float(lam),
                norm_X_sq=ctx.norm_X_squared(w),
                E=st.E,
                S=st.S,
                F=st.F,
                w=w,
                phi=phi,
                newton_iterations=it,
                residual=float(res),
                arclength_residual=float(g3),
            )
        if it == cfg.max_newton or not np.isfinite(res) or _diverging(history):
            break
        jac = assemble_jacobian(w, phi, lam, ctx)
        gcol = np.concatenate([-ctx.ops.axx(w), np.zeros(n)])
        dv, dz, dl = _bordered_solve(jac, gcol, h, d, -_project(g1), -_project(g2), -g3)
        w, phi, lam = w + dv, phi + dz, lam + dl
    raise StepFailure(f"corrector failed at s={s:.6g} (residual {history[-1]:.3e})")


def continuation_step(state: ContinuationState, ctx: ModelContext, cfg: ContinuationConfig | None = None):
    """One predictor-corrector step; halves ``ds`` on failure down to ``cfg.ds_min``.

    Returns the new branch point and the state for the next step (secant direction).
    """
    _require_sparse_setting(ctx)
    cfg = cfg or ContinuationConfig()
    ds = state.ds
    while True:
        try:
            bp = _corrector(state, ds, ctx, cfg)
            break
        except (StepFailure, SingularReducedSystem, Diverged) as exc:
            log.info("continuation step ds=%.3g failed: %s", ds, exc)
            ds *= 0.5
            if abs(ds) < cfg.ds_min:
                raise StepFailure(f"step size fell below {cfg.ds_min} at s={state.s0:.6g}") from exc
    w_dot, lam_dot = normalized_direction(ctx, state.theta, bp.w - state.w0, bp.lam - state.lam0)
    next_ds = ds
    if bp.newton_iterations <= cfg.fast_iterations:
        next_ds = np.sign(ds) * min(abs(ds) * cfg.grow, cfg.ds_max)
    new_state = ContinuationState(bp.s, bp.lam, bp.w, bp.phi, lam_dot, w_dot, state.theta, next_ds)
    return bp, new_state


def initial_state(start: CriticalPoint, ctx: ModelContext, ds: float, theta: float = 0.5, direction: int = -1, delta: float = 1e-4):
    """Branch direction at ``start`` from a fixed-load Newton solve at ``lam + direction*delta``."""
    nb = newton_fixed_load(start.w, start.phi, start.lam + direction * delta, ctx)
    w_dot, lam_dot = normalized_direction(ctx, theta, nb.w - start.w, nb.lam - start.lam)
    return ContinuationState(0.0, start.lam, start.w, start.phi, lam_dot, w_dot, theta, abs(ds))


def _start_point(start: CriticalPoint, ctx):
    return BranchPoint(
        s=0.0,
        lam=start.lam,
        norm_X_sq=ctx.norm_X_squared(start.w),
        E=start.E,
        S=start.S,
        F=start.F,
        w=start.w,
        phi=start.phi,
        residual=start.residual,
    )


def continuation_run(
    start: CriticalPoint,
    s_max: float,
    ds: float,
    ctx: ModelContext,
    theta: float = 0.5,
    direction: int = -1,
    cfg: ContinuationConfig | None = None,
    lam_bounds: tuple[float, float] = (0.0, 2.0),
    max_steps: int = 10_000,
    state: ContinuationState | None = None,
    callback=None,
):
    """March along the branch through ``start`` until arclength ``s_max`` (or lambda leaves its bounds).

    A ``callback`` receives each accepted point and may return True to stop.  On a
    step failure the partial branch is returned; the last error is kept on the
    returned list's ``error`` attribute.
    """
    cfg = cfg or ContinuationConfig()
    branch = BranchList([_start_point(start, ctx)])
    if s_max <= 0:
        return branch
    if state is None:
        state = initial_state(start, ctx, ds, theta, direction)
    for _ in range(max_steps):
        if state.s0 >= s_max:
            break
        state.ds = min(state.ds, s_max - state.s0)
        try:
            bp, state = continuation_step(state, ctx, cfg)
        except StepFailure as exc:
            branch.error = exc
            log.warning("continuation stopped: %s", exc)
            break
        branch.append(bp)
        if callback is not None and callback(bp):
            break
        if not lam_bounds[0] < bp.lam < lam_bounds[1]:
            break
    return branch


class BranchList(list):
    error: Exception | None = None
