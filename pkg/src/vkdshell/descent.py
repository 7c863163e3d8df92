"""Steepest descent on F_lambda and constrained steepest descent on E at fixed S."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConstraint, ValidationError
from .model import Functionals, ModelContext, State

log = logging.getLogger(__name__)


class FlowStatus(str, enum.Enum):
    CONVERGED_TO_ZERO = "ConvergedToZero"
    CONVERGED_CRITICAL = "ConvergedCritical"
    NEGATIVE_POTENTIAL = "NegativePotentialReached"
    ITERATION_CAP = "IterationCap"


@dataclass
class FlowConfig:
    dt: float = 0.5
    tol: float = 1e-6
    max_iter: int = 200_000
    adapt: bool = True
    dt_max: float = 4.0
    grow_after: int = 10
    stop_on_negative: bool = False
    history_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.tol > 0 and self.max_iter >= 1):
            raise ValidationError("FlowConfig needs dt > 0, tol > 0, max_iter >= 1")


@dataclass
class FlowResult:
    w: np.ndarray
    lam: float
    functionals: Functionals
    status: FlowStatus
    grad_norm: float
    iterations: int
    history: list = field(default_factory=list)


def _check_lambda(lam):
    if not 0.0 < lam < 2.0:
        raise ValidationError(f"load must lie in (0, 2), got {lam}")


def sdm_run(w0, lam: float, cfg: FlowConfig, ctx: ModelContext, callback=None) -> FlowResult:
    """Explicit Euler on ``dw/dt = -grad_lambda F_lambda(w)`` with step adaptation."""
    _check_lambda(lam)
    w = ctx.grid.check(w0).copy()
    st = ctx.state(w, lam)
    dt = cfg.dt
    history = []
    accepted = 0
    status = FlowStatus.ITERATION_CAP
    it = 0
    for it in range(cfg.max_iter + 1):
        gnorm = st.grad_F_lam_norm
        if it % cfg.history_every == 0:
            history.append((it, st.F, gnorm))
        if callback is not None:
            callback(it, st)
        if cfg.stop_on_negative and st.F < 0.0:
            status = FlowStatus.NEGATIVE_POTENTIAL
            break
        if gnorm <= cfg.tol:
            wn = np.sqrt(max(ctx.norm_X_squared(w, lam), 0.0))
            status = FlowStatus.CONVERGED_TO_ZERO if wn <= 10 * cfg.tol else FlowStatus.CONVERGED_CRITICAL
            break
        if it == cfg.max_iter:
            break
        while True:
            trial = ctx.state(w - dt * st.grad_F_lam, lam)
            if not cfg.adapt or trial.F <= st.F:
                break
            dt *= 0.5
            accepted = 0
            if dt < 1e-14:
                break
        w, st = trial.w, trial
        accepted += 1
        if cfg.adapt and accepted >= cfg.grow_after:
            dt = min(2.0 * dt, cfg.dt_max)
            accepted = 0
    return FlowResult(w, lam, st.functionals, status, st.grad_F_lam_norm, it, history)


# -- constrained ------------------------------------------------------------------


def _degenerate_check(ctx, st: State):
    nS2 = ctx.pairing * float(st.grad_S @ st.dS)
    nw2 = max(ctx.norm_X_squared(st.w), 0.0)
    if nw2 == 0.0 or nS2 <= (1e-12) ** 2 * nw2:
        raise DegenerateConstraint("grad S vanishes: w lies on no manifold S = C > 0")
    return nS2


def project_tangent(w, u, ctx: ModelContext, st: State | None = None):
    """X-orthogonal projection of ``u`` onto the tangent space of {S = S(w)} at w."""
    st = st if st is not None else ctx.state(w)
    nS2 = _degenerate_check(ctx, st)
    # <grad S, u>_X = pairing * S'(w)^T u
    coef = ctx.pairing * float(st.dS @ u) / nS2
    return u - coef * st.grad_S


def rescale_to_manifold(w, C: float, ctx: ModelContext):
    w = np.asarray(w, dtype=float)
    S = ctx.shortening(w)
    if not S > 0:
        raise DegenerateConstraint(f"cannot rescale a field with S = {S} onto S = {C}")
    return np.sqrt(C / S) * w


def lagrange_load(w, ctx: ModelContext, st: State | None = None) -> float:
    """Load lambda = <grad S, grad E>_X / |grad S|_X^2."""
    st = st if st is not None else ctx.state(w)
    nS2 = _degenerate_check(ctx, st)
    return ctx.pairing * float(st.grad_S @ st.dE) / nS2


def constrained_direction(ctx: ModelContext, st: State):
    """Return ``(P_w grad E, |P_w grad E|_X, lambda)`` at the state ``st``."""
    nS2 = _degenerate_check(ctx, st)
    lam = ctx.pairing * float(st.grad_S @ st.dE) / nS2
    d = st.grad_E - lam * st.grad_S
    # |d|_X^2 = pairing * d^T (E' - lam S')
    n2 = ctx.pairing * float(d @ (st.dE - lam * st.dS))
    return d, float(np.sqrt(max(n2, 0.0))), lam


def csdm_run(w0, C: float, cfg: FlowConfig, ctx: ModelContext, callback=None) -> FlowResult:
    """Projected gradient flow of E on {S = C}, rescaling back after each Euler step."""
    if not C > 0:
        raise ValidationError(f"shortening level must be positive, got {C}")
    w = rescale_to_manifold(ctx.grid.check(w0), C, ctx)
    st = ctx.state(w)
    d, dn, lam = constrained_direction(ctx, st)
    dt = cfg.dt
    history = []
    accepted = 0
    status = FlowStatus.ITERATION_CAP
    it = 0
    for it in range(cfg.max_iter + 1):
        if it % cfg.history_every == 0:
            history.append((it, st.E, dn))
        if callback is not None:
            callback(it, st)
        if dn <= cfg.tol:
            status = FlowStatus.CONVERGED_CRITICAL
            break
        if it == cfg.max_iter:
            break
        while True:
            trial = ctx.state(rescale_to_manifold(w - dt * d, C, ctx))
            if not cfg.adapt or trial.E <= st.E:
                break
            dt *= 0.5
            accepted = 0
            if dt < 1e-14:
                break
        w, st = trial.w, trial
        d, dn, lam = constrained_direction(ctx, st)
        accepted += 1
        if cfg.adapt and accepted >= cfg.grow_after:
            dt = min(2.0 * dt, cfg.dt_max)
            accepted = 0
    return FlowResult(w, lam, Functionals.of(st.E, st.S, lam), status, dn, it, history)
