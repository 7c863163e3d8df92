"""Discrete von Karman-Donnell model: brackets, Airy stress, functionals and gradients."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grid import GridSpec, Scheme, project_zero_mean
from .spectral import TransformPlan


@dataclass(frozen=True)
class Functionals:
    E: float
    S: float
    F: float
    lam: float

    @classmethod
    def of(cls, E, S, lam):
        return cls(float(E), float(S), float(E - lam * S), float(lam))


class ModelContext:
    """Grid, transform plan and the scheme-dependent mixed derivative."""

    def __init__(self, grid: GridSpec, plan: TransformPlan | None = None):
        self.grid = grid
        self.plan = plan if plan is not None else TransformPlan(grid)
        self.ops = grid.ops
        if grid.scheme is Scheme.SPECTRAL:
            self.mixed = self.plan.apply_spectral_mixed
            self.mixed_t = self.plan.apply_spectral_mixed_t
        else:
            self.mixed = self.ops.axy
            self.mixed_t = self.ops.axy_t
        # <u, v>_X = pairing * u^T G v  and  dE(w).h = pairing * E'(w)^T h
        self.pairing = grid.symmetry_multiplier * grid.cell_area

    # -- brackets ---------------------------------------------------------------

    def bracket_quadratic(self, w):
        """[w,w]_2 = (Axx w)(Ayy w) - (Axy w)^2."""
        m = self.mixed(w)
        return self.ops.axx(w) * self.ops.ayy(w) - m * m

    def bracket_bilinear(self, w, h):
        """Symmetric bilinear form with ``bracket_bilinear(w, w) == bracket_quadratic(w)``."""
        o = self.ops
        return 0.5 * (o.axx(w) * o.ayy(h) + o.axx(h) * o.ayy(w)) - self.mixed(w) * self.mixed(h)

    def bracket_adjoint(self, w, phi):
        """[w,phi]_1, the transpose of ``h -> [w,h]_2`` applied to phi."""
        o = self.ops
        return 0.5 * o.ayy(o.axx(w) * phi) + 0.5 * o.axx(o.ayy(w) * phi) - self.mixed_t(self.mixed(w) * phi)

    # -- model ------------------------------------------------------------------

    def compute_airy(self, w):
        w = self.grid.check(w)
        # the right-hand side has zero mean by summation by parts; strip roundoff
        return self.plan.solve_biharmonic(project_zero_mean(self.ops.axx(w) - self.bracket_quadratic(w)))

    def state(self, w, lam: float = 0.0) -> "State":
        return State(self, self.grid.check(w), lam)

    def evaluate(self, w, lam: float = 0.0) -> Functionals:
        return self.state(w, lam).functionals

    def shortening(self, w) -> float:
        g = self.grid
        return g.energy_factor * g.cell_area * float(w @ self.ops.axx(w))

    def residual_fixed_load(self, w, phi, lam):
        o = self.ops
        g1 = o.abiharm(w) - lam * o.axx(w) + o.axx(phi) - 2.0 * self.bracket_adjoint(w, phi)
        g2 = -o.abiharm(phi) + o.axx(w) - self.bracket_quadratic(w)
        return g1, g2

    def derivative_E(self, w):
        return self.state(w).dE

    def derivative_S(self, w):
        return self.ops.axx(self.grid.check(w))

    def gradient(self, kind: str, w, lam: float = 0.0, metric: str = "X"):
        st = self.state(w, lam)
        d = {"E": st.dE, "S": st.dS, "F": st.dF}[kind]
        return self.plan.solve_metric(project_zero_mean(d), lam if metric == "XLambda" else 0.0)

    # -- inner products ---------------------------------------------------------

    def inner_X(self, u, v, lam: float = 0.0):
        """<u, v>_{X,lam}, evaluated diagonally in transform coordinates."""
        p = self.plan
        uh, vh = p.to_fourier(u), p.to_fourier(v)
        s = np.sum(p.parseval_weights * p.metric_symbol(lam) * np.real(uh * np.conj(vh)))
        return self.pairing * float(s)

    def norm_X_squared(self, w, lam: float = 0.0):
        w = self.grid.check(w)
        G = self.ops.abiharm(w) + self.ops.axx(self.plan.solve_biharmonic(project_zero_mean(self.ops.axx(w)))) - lam * self.ops.axx(w)
        return self.pairing * float(w @ G)

    def apply_metric(self, v, lam: float = 0.0):
        """Forward application of ``ABiharm + Axx ABiharm^{-1} Axx - lam Axx`` in grid space."""
        o = self.ops
        return o.abiharm(v) + o.axx(self.plan.solve_biharmonic(project_zero_mean(o.axx(v)))) - lam * o.axx(v)


class State:
    """Lazily evaluated quantities at one ``w``; ``phi`` is solved once and reused."""

    def __init__(self, ctx: ModelContext, w: np.ndarray, lam: float = 0.0):
        self.ctx = ctx
        self.w = w
        self.lam = float(lam)

    @cached_property
    def axx_w(self):
        return self.ctx.ops.axx(self.w)

    @cached_property
    def phi(self):
        c = self.ctx
        return c.plan.solve_biharmonic(project_zero_mean(self.axx_w - c.bracket_quadratic(self.w)))

    @cached_property
    def E(self):
        c = self.ctx
        lw = c.ops.alap(self.w)
        lp = c.ops.alap(self.phi)
        return c.grid.energy_factor * c.grid.cell_area * float(lw @ lw + lp @ lp)

    @cached_property
    def S(self):
        c = self.ctx
        return c.grid.energy_factor * c.grid.cell_area * float(self.w @ self.axx_w)

    @property
    def F(self):
        return self.E - self.lam * self.S

    @property
    def functionals(self) -> Functionals:
        return Functionals.of(self.E, self.S, self.lam)

    @cached_property
    def dE(self):
        c = self.ctx
        return c.ops.abiharm(self.w) + c.ops.axx(self.phi) - 2.0 * c.bracket_adjoint(self.w, self.phi)

    @property
    def dS(self):
        return self.axx_w

    @cached_property
    def dF(self):
        return self.dE - self.lam * self.dS

    # X-metric gradients (CSDM / CMPA) and the X,lambda gradient of F (SDM / MPA).
    # The derivatives are zero-mean by construction; near a critical point they
    # are pure roundoff, so the mean is removed rather than checked.
    @cached_property
    def grad_E(self):
        return self.ctx.plan.solve_metric(project_zero_mean(self.dE), 0.0)

    @cached_property
    def grad_S(self):
        return self.ctx.plan.solve_metric(project_zero_mean(self.dS), 0.0)

    @cached_property
    def grad_F_lam(self):
        return self.ctx.plan.solve_metric(project_zero_mean(self.dF), self.lam)

    @cached_property
    def grad_F_lam_norm(self):
        # |g|^2_{X,lam} = pairing * g^T G_lam g = pairing * g^T F'
        return float(np.sqrt(max(self.ctx.pairing * float(self.grad_F_lam @ self.dF), 0.0)))
