"""Uniform cell-centred mesh and Kronecker-structured finite difference operators.

Fields are flat float arrays of length ``M*N`` with index ``i = n*M + m``
(``m`` fastest), i.e. ``w.reshape(N, M)[n, m]`` is the sample at
``(x_m, y_n)``.  All operators act matrix-free along one axis of that view.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import SchemeMismatch, ValidationError

EPS_MEAN = 1e-12


class Boundary(str, enum.Enum):
    QUARTER = "quarter"  # Neumann on all four sides of the quarter domain
    FULL = "full"  # Neumann in x, periodic in y


class Scheme(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"
    SPECTRAL = "spectral"


class Op(str, enum.Enum):
    AXX = "Axx"
    AYY = "Ayy"
    ABIHARM = "ABiharm"
    AX = "Ax"
    AY = "Ay"
    AXY = "Axy"
    AXY_T = "AxyTranspose"


@dataclass(frozen=True)
class GridSpec:
    """Mesh over the quarter domain (-a,0)x(-b,0) or the full domain (-a,a)x(-b,b).

    ``a`` and ``b`` are always the half-lengths of the cylinder domain.  On the
    quarter domain the mesh width is ``a/M``; on the full domain it is ``2a/M``.
    """

    a: float
    b: float
    M: int
    N: int
    boundary: Boundary = Boundary.QUARTER
    scheme: Scheme = Scheme.LEFT

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.a > 0 and self.b > 0):
            raise ValidationError(f"domain half-lengths must be positive, got a={self.a}, b={self.b}")
        if int(self.M) != self.M or int(self.N) != self.N or self.M < 2 or self.N < 2:
            raise ValidationError(f"mesh counts must be integers >= 2, got M={self.M}, N={self.N}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))

    @property
    def quarter(self) -> bool:
        return self.boundary is Boundary.QUARTER

    @property
    def lx(self) -> float:
        return self.a if self.quarter else 2.0 * self.a

    @property
    def ly(self) -> float:
        return self.b if self.quarter else 2.0 * self.b

    @property
    def dx(self) -> float:
        return self.lx / self.M

    @property
    def dy(self) -> float:
        return self.ly / self.N

    @property
    def size(self) -> int:
        return self.M * self.N

    @property
    def shape(self) -> tuple[int, int]:
        """Shape of the (N, M) array view of a field."""
        return (self.N, self.M)

    @property
    def x(self) -> np.ndarray:
        return -self.a + (np.arange(1, self.M + 1) - 0.5) * self.dx

    @property
    def y(self) -> np.ndarray:
        return -self.b + (np.arange(1, self.N + 1) - 0.5) * self.dy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of shape (N, M)."""
        return np.meshgrid(self.x, self.y)

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def symmetry_multiplier(self) -> float:
        """Number of copies of the computational domain that make up the cylinder."""
        return 4.0 if self.quarter else 1.0

    @property
    def energy_factor(self) -> float:
        """kappa in ``E = kappa (w'A w + phi'A phi) dx dy``: half the symmetry multiplier."""
        return 0.5 * self.symmetry_multiplier

    def with_scheme(self, scheme) -> "GridSpec":
        return GridSpec(self.a, self.b, self.M, self.N, self.boundary, Scheme(scheme))

    def check(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.size,):
            raise ValidationError(f"field of shape {w.shape} does not match grid {self.M}x{self.N}")
        return w

    @cached_property
    def ops(self) -> "Operators":
        return Operators(self)


def build_grid(a, b, M, N, boundary=Boundary.QUARTER, scheme=Scheme.LEFT) -> GridSpec:
    return GridSpec(a, b, M, N, Boundary(boundary), Scheme(scheme))


def grid_from_step(a, b, dx, dy=None, boundary=Boundary.QUARTER, scheme=Scheme.LEFT) -> GridSpec:
    """Grid with mesh width as close as possible to ``dx`` (and ``dy``)."""
    dy = dx if dy is None else dy
    boundary = Boundary(boundary)
    factor = 1.0 if boundary is Boundary.QUARTER else 2.0
    M = int(round(factor * a / dx))
    N = int(round(factor * b / dy))
    return GridSpec(a, b, M, N, boundary, Scheme(scheme))


def quadrature_weight(grid: GridSpec) -> tuple[float, float]:
    """Return ``(symmetry multiplier, cell area)``."""
    return grid.symmetry_multiplier, grid.cell_area


def project_zero_mean(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return w - w.mean()


def is_zero_mean(w: np.ndarray, eps: float = EPS_MEAN) -> bool:
    scale = np.max(np.abs(w)) if w.size else 0.0
    return abs(np.sum(w)) <= eps * w.size * max(scale, np.finfo(float).tiny)


# ---------------------------------------------------------------------------
# 1-D stencils along a given axis of an (N, M) array.


def _d2_neumann(v: np.ndarray, axis: int) -> np.ndarray:
    v = np.moveaxis(v, axis, -1)
    out = np.empty_like(v)
    out[..., 1:-1] = 2.0 * v[..., 1:-1] - v[..., :-2] - v[..., 2:]
    out[..., 0] = v[..., 0] - v[..., 1]
    out[..., -1] = v[..., -1] - v[..., -2]
    return np.moveaxis(out, -1, axis)


def _d2_periodic(v: np.ndarray, axis: int) -> np.ndarray:
    return 2.0 * v - np.roll(v, 1, axis=axis) - np.roll(v, -1, axis=axis)


def _d1(v: np.ndarray, axis: int, left: bool, periodic: bool, transpose: bool) -> np.ndarray:
    """One-sided difference A1L/A1R (or its periodic variant) or its transpose."""
    if periodic:
        if left:  # (A v)_i = v_i - v_{i-1}
            return v - np.roll(v, -1, axis=axis) if transpose else v - np.roll(v, 1, axis=axis)
        # (A v)_i = v_{i+1} - v_i
        return np.roll(v, 1, axis=axis) - v if transpose else np.roll(v, -1, axis=axis) - v
    v = np.moveaxis(v, axis, -1)
    out = np.zeros_like(v)
    if left:
        if transpose:
            out[..., :-1] = -v[..., 1:]
            out[..., 1:] += v[..., 1:]
        else:
            out[..., 1:] = v[..., 1:] - v[..., :-1]
    else:
        if transpose:
            out[..., :-1] = -v[..., :-1]
            out[..., 1:] += v[..., :-1]
        else:
            out[..., :-1] = v[..., 1:] - v[..., :-1]
    return np.moveaxis(out, -1, axis)


class Operators:
    """Matrix-free application of the structured operators of one grid."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self._periodic_y = not grid.quarter
        self._left = grid.scheme is Scheme.LEFT
        self._idx2 = 1.0 / grid.dx**2
        self._idy2 = 1.0 / grid.dy**2

    def _view(self, w):
        return np.asarray(w, dtype=float).reshape(self.grid.shape)

    def axx(self, w):
        return (_d2_neumann(self._view(w), 1) * self._idx2).ravel()

    def ayy(self, w):
        W = self._view(w)
        d2 = _d2_periodic(W, 0) if self._periodic_y else _d2_neumann(W, 0)
        return (d2 * self._idy2).ravel()

    def alap(self, w):
        """``Axx + Ayy``, a discretisation of ``-Laplacian``."""
        return self.axx(w) + self.ayy(w)

    def abiharm(self, w):
        return self.alap(self.alap(w))

    def _require_sided(self):
        if self.grid.scheme is Scheme.SPECTRAL:
            raise SchemeMismatch("one-sided first differences are undefined under the spectral scheme")

    def ax(self, w, transpose=False):
        self._require_sided()
        return (_d1(self._view(w), 1, self._left, False, transpose) / self.grid.dx).ravel()

    def ay(self, w, transpose=False):
        self._require_sided()
        return (_d1(self._view(w), 0, self._left, self._periodic_y, transpose) / self.grid.dy).ravel()

    def axy(self, w):
        # Axy = -Ax Ay
        return -self.ax(self.ay(w))

    def axy_t(self, u):
        # Axy^T = -Ay^T Ax^T
        return -self.ay(self.ax(u, transpose=True), transpose=True)

    def apply(self, op: Op, w):
        op = Op(op)
        w = self.grid.check(w)
        return {
            Op.AXX: self.axx,
            Op.AYY: self.ayy,
            Op.ABIHARM: self.abiharm,
            Op.AX: self.ax,
            Op.AY: self.ay,
            Op.AXY: self.axy,
            Op.AXY_T: self.axy_t,
        }[op](w)

    # -- sparse assembly, used by the Newton solvers ---------------------------

    @cached_property
    def sparse(self) -> dict[str, sp.csr_matrix]:
        g = self.grid
        Ix, Iy = sp.identity(g.M, format="csr"), sp.identity(g.N, format="csr")
        a2x = second_difference_matrix(g.M)
        a2y = periodic_second_difference_matrix(g.N) if self._periodic_y else second_difference_matrix(g.N)
        # Kronecker convention A^M (x) B^N == scipy kron(B, A)
        mats = {
            "Axx": sp.kron(Iy, a2x, format="csr") * self._idx2,
            "Ayy": sp.kron(a2y, Ix, format="csr") * self._idy2,
        }
        lap = mats["Axx"] + mats["Ayy"]
        mats["ABiharm"] = (lap @ lap).tocsr()
        if g.scheme is not Scheme.SPECTRAL:
            a1x = first_difference_matrix(g.M, self._left)
            a1y = first_difference_matrix(g.N, self._left, periodic=self._periodic_y)
            mats["Ax"] = sp.kron(Iy, a1x, format="csr") / g.dx
            mats["Ay"] = sp.kron(a1y, Ix, format="csr") / g.dy
            mats["Axy"] = (-(mats["Ax"] @ mats["Ay"])).tocsr()
        return mats


def apply_operator(op: Op, w: np.ndarray, grid: GridSpec) -> np.ndarray:
    return grid.ops.apply(op, w)


def second_difference_matrix(M: int) -> sp.csr_matrix:
    """Neumann second-difference matrix A2 (unscaled)."""
    main = np.full(M, 2.0)
    main[0] = main[-1] = 1.0
    off = -np.ones(M - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def periodic_second_difference_matrix(N: int) -> sp.csr_matrix:
    A = sp.lil_matrix(second_difference_matrix(N))
    A[0, 0] = A[-1, -1] = 2.0
    A[0, -1] += -1.0
    A[-1, 0] += -1.0
    return A.tocsr()


def first_difference_matrix(M: int, left: bool, periodic: bool = False) -> sp.csr_matrix:
    """A1L (backward) or A1R (forward) difference matrix, unscaled."""
    A = sp.lil_matrix((M, M))
    for i in range(M):
        if left:
            if i > 0 or periodic:
                A[i, i] += 1.0
                A[i, (i - 1) % M] += -1.0
        else:
            if i < M - 1 or periodic:
                A[i, i] += -1.0
                A[i, (i + 1) % M] += 1.0
    return A.tocsr()
