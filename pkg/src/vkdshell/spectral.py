"""Cosine/sine/Fourier coordinates and diagonal solves.

The transforms match the matrices

    C_f = 1/sqrt(2M) [2 cos((i-1)(2j-1) pi / 2M)]
    C_b = 1/sqrt(2M) [1 | 2 cos((2i-1)(j-1) pi / 2M)]
    S   = 1/sqrt(2M) [0 | 2 sin((2i-1)(j-1) pi / 2M)]

which are DCT-II, DCT-III and a shifted DST-III up to the ``1/sqrt(2M)``
scale.  With the periodic y-boundary the y axis uses ``rfft`` instead and the
transform coordinates are complex, of shape ``(N//2 + 1, M)``.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.fft as fft

from .errors import NonPositiveMetric, NonZeroMeanRightHandSide, SchemeMismatch
from .grid import EPS_MEAN, GridSpec, Scheme


def _mean_ok(f: np.ndarray, eps: float) -> bool:
    scale = max(np.max(np.abs(f)), np.finfo(float).tiny)
    return abs(f.sum()) <= eps * f.size * scale


def _cos_fwd(V, axis):
    n = V.shape[axis]
    return fft.dct(V, type=2, axis=axis) / np.sqrt(2 * n)


def _cos_bwd(V, axis):
    n = V.shape[axis]
    return fft.dct(V, type=3, axis=axis) / np.sqrt(2 * n)


def _cos_fwd_t(V, axis):
    # C_f^T: DCT-III counts the zeroth coefficient once instead of twice
    n = V.shape[axis]
    V = np.moveaxis(V, axis, -1)
    out = fft.dct(V, type=3, axis=-1) + V[..., :1]
    return np.moveaxis(out, -1, axis) / np.sqrt(2 * n)


def _sin_bwd(V, axis):
    """Apply S: coefficient j multiplies 2 sin((2i-1)(j-1)pi/2M); column 0 is void."""
    n = V.shape[axis]
    V = np.moveaxis(V, axis, -1)
    shifted = np.zeros_like(V)
    shifted[..., :-1] = V[..., 1:]
    out = fft.dst(shifted, type=3, axis=-1)
    return np.moveaxis(out, -1, axis) / np.sqrt(2 * n)


def _sin_bwd_t(V, axis):
    n = V.shape[axis]
    V = np.moveaxis(V, axis, -1)
    y = fft.dst(V, type=2, axis=-1)
    out = np.zeros_like(V)
    out[..., 1:] = y[..., :-1]
    return np.moveaxis(out, -1, axis) / np.sqrt(2 * n)


def one_d_eigenvalues(M: int, periodic: bool = False) -> np.ndarray:
    """Eigenvalues of the (unscaled) 1-D second-difference matrix in transform order."""
    if periodic:
        k = np.arange(M // 2 + 1)
        return 2.0 - 2.0 * np.cos(2.0 * np.pi * k / M)
    return 2.0 - 2.0 * np.cos(np.arange(M) * np.pi / M)


class TransformPlan:
    """Transforms, spectra and diagonal inverses for one grid.  Immutable."""

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.periodic = not grid.quarter
        lam_x = one_d_eigenvalues(grid.M) / grid.dx**2
        lam_y = one_d_eigenvalues(grid.N, self.periodic) / grid.dy**2
        self.lambda_xx = np.broadcast_to(lam_x[None, :], (lam_y.size, grid.M)).copy()
        self.lambda_yy = np.broadcast_to(lam_y[:, None], (lam_y.size, grid.M)).copy()
        self.lambda_lap = self.lambda_xx + self.lambda_yy
        self.lambda_biharm = self.lambda_lap**2
        self.lambda_biharm.setflags(write=False)
        nz = self.lambda_biharm > 0
        nz[0, 0] = False
        self._nonconst = nz
        self._inv_biharm = np.zeros_like(self.lambda_biharm)
        self._inv_biharm[nz] = 1.0 / self.lambda_biharm[nz]
        # symbol of  ABiharm + Axx ABiharm^{-1} Axx
        self.lambda_metric = np.zeros_like(self.lambda_biharm)
        self.lambda_metric[nz] = self.lambda_biharm[nz] + self.lambda_xx[nz] ** 2 / self.lambda_biharm[nz]
        for lam in (0.5, 1.0, 1.4, 1.9):
            self.metric_symbol(lam)  # raises if the metric is not coercive

    # -- transforms -----------------------------------------------------------

    @property
    def coeff_shape(self) -> tuple[int, int]:
        return self.lambda_xx.shape

    def to_fourier(self, w: np.ndarray) -> np.ndarray:
        W = np.asarray(w, dtype=float).reshape(self.grid.shape)
        X = _cos_fwd(W, 1)
        if self.periodic:
            return fft.rfft(X, axis=0)
        return _cos_fwd(X, 0)

    def from_fourier(self, what: np.ndarray) -> np.ndarray:
        if self.periodic:
            X = fft.irfft(what, n=self.grid.N, axis=0)
        else:
            X = _cos_bwd(np.asarray(what, dtype=float).reshape(self.coeff_shape), 0)
        return _cos_bwd(X, 1).ravel()

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Weights D with ``|w|^2 = sum D |w_hat|^2`` (C_f is orthogonal only up to D)."""
        dx = np.ones(self.grid.M)
        dx[0] = 0.5
        if self.periodic:
            N = self.grid.N
            dy = np.full(N // 2 + 1, 2.0 / N)
            dy[0] = 1.0 / N
            if N % 2 == 0:
                dy[-1] = 1.0 / N
        else:
            dy = np.ones(self.grid.N)
            dy[0] = 0.5
        return dy[:, None] * dx[None, :]

    # -- diagonal solves ------------------------------------------------------

    def _require_zero_mean(self, f, eps):
        if not _mean_ok(f, eps):
            raise NonZeroMeanRightHandSide(
                f"right-hand side has sum {f.sum():.3e} (max |f| = {np.max(np.abs(f)):.3e})"
            )

    def solve_biharmonic(self, f: np.ndarray, eps: float = 1e3 * EPS_MEAN) -> np.ndarray:
        """Zero-mean psi with ``ABiharm psi = f``."""
        f = self.grid.check(f)
        self._require_zero_mean(f, eps)
        return self.from_fourier(self.to_fourier(f) * self._inv_biharm)

    def apply_inverse_biharmonic_symbol(self, fhat: np.ndarray) -> np.ndarray:
        return fhat * self._inv_biharm

    def metric_symbol(self, lam: float = 0.0) -> np.ndarray:
        """Symbol of ``ABiharm + Axx ABiharm^{-1} Axx - lam Axx``.  Zero only at the constant mode."""
        sym = self.lambda_metric - lam * self.lambda_xx
        sym[0, 0] = 0.0
        if np.any(sym[self._nonconst] <= 0.0) or np.any(self.lambda_biharm[self._nonconst] <= 0):
            raise NonPositiveMetric(f"metric with lambda={lam} is not positive on this grid")
        return sym

    def _inv_metric(self, lam):
        cache = self.__dict__.setdefault("_inv_metric_cache", {})
        inv = cache.get(lam)
        if inv is None:
            sym = self.metric_symbol(lam)
            inv = np.zeros_like(sym)
            inv[self._nonconst] = 1.0 / sym[self._nonconst]
            if len(cache) > 16:
                cache.clear()
            cache[lam] = inv
        return inv

    def solve_metric(self, r: np.ndarray, lam: float = 0.0, eps: float = 1e3 * EPS_MEAN) -> np.ndarray:
        """Zero-mean v with ``(ABiharm + Axx ABiharm^{-1} Axx - lam Axx) v = r``.

        ``lam = 0`` gives the X metric, otherwise the X,lambda metric.
        """
        r = self.grid.check(r)
        self._require_zero_mean(r, eps)
        return self.from_fourier(self.to_fourier(r) * self._inv_metric(float(lam)))

    def apply_metric(self, v: np.ndarray, lam: float = 0.0) -> np.ndarray:
        """Forward application of the metric operator (through the diagonal form)."""
        return self.from_fourier(self.to_fourier(v) * self.metric_symbol(lam))

    # -- unbiased mixed derivative -------------------------------------------

    @cached_property
    def _sqrt_xy(self) -> np.ndarray:
        g = self.grid
        sx = np.sqrt(one_d_eigenvalues(g.M)) / g.dx
        if self.periodic:
            N = g.N
            k = np.arange(N // 2 + 1)
            sy = 1j * 2.0 * np.sin(np.pi * k / N) / g.dy
            if N % 2 == 0:
                # real at Nyquist so that the operator stays real; |sy|^2 still equals the A2 eigenvalue
                sy[-1] = 2.0 / g.dy
        else:
            sy = np.sqrt(one_d_eigenvalues(g.N)) / g.dy
        return sy[:, None] * sx[None, :]

    def _check_spectral(self):
        if self.grid.scheme is not Scheme.SPECTRAL:
            raise SchemeMismatch("the transform-based mixed derivative belongs to the spectral scheme")

    def apply_spectral_mixed(self, w: np.ndarray) -> np.ndarray:
        """``S Lambda_xy C_f w``."""
        self._check_spectral()
        W = np.asarray(w, dtype=float).reshape(self.grid.shape)
        X = _cos_fwd(W, 1)
        if self.periodic:
            Y = fft.irfft(fft.rfft(X, axis=0) * self._sqrt_xy, n=self.grid.N, axis=0)
        else:
            Y = _sin_bwd(_cos_fwd(X, 0) * self._sqrt_xy, 0)
        return _sin_bwd(Y, 1).ravel()

    def apply_spectral_mixed_t(self, u: np.ndarray) -> np.ndarray:
        """``C_f^T Lambda_xy S^T u``."""
        self._check_spectral()
        U = np.asarray(u, dtype=float).reshape(self.grid.shape)
        X = _sin_bwd_t(U, 1)
        if self.periodic:
            Y = fft.irfft(fft.rfft(X, axis=0) * np.conj(self._sqrt_xy), n=self.grid.N, axis=0)
        else:
            Y = _cos_fwd_t(_sin_bwd_t(X, 0) * self._sqrt_xy, 0)
        return _cos_fwd_t(Y, 1).ravel()


def spectra(plan: TransformPlan) -> dict[str, np.ndarray]:
    return {
        "lambda_xx": plan.lambda_xx,
        "lambda_yy": plan.lambda_yy,
        "lambda_biharm": plan.lambda_biharm,
    }


# Dense 1-D matrices, used by tests and for small-grid cross checks.


def cf_matrix(M: int) -> np.ndarray:
    i = np.arange(M)[:, None]
    j = np.arange(1, M + 1)[None, :]
    return 2.0 * np.cos(i * (2 * j - 1) * np.pi / (2 * M)) / np.sqrt(2 * M)


def cb_matrix(M: int) -> np.ndarray:
    i = np.arange(1, M + 1)[:, None]
    j = np.arange(M)[None, :]
    C = 2.0 * np.cos((2 * i - 1) * j * np.pi / (2 * M))
    C[:, 0] = 1.0
    return C / np.sqrt(2 * M)


def s_matrix(M: int) -> np.ndarray:
    i = np.arange(1, M + 1)[:, None]
    j = np.arange(M)[None, :]
    S = 2.0 * np.sin((2 * i - 1) * j * np.pi / (2 * M))
    S[:, 0] = 0.0
    return S / np.sqrt(2 * M)
