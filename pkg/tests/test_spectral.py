import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vkdshell.errors import NonPositiveMetric, NonZeroMeanRightHandSide, SchemeMismatch
from vkdshell.grid import GridSpec
from vkdshell.spectral import TransformPlan, cb_matrix, cf_matrix, one_d_eigenvalues

from .conftest import dense, random_field
from .test_grid import neumann_d2


@pytest.mark.parametrize("M", [2, 3, 4, 5, 6, 17])
def test_cosine_pair_and_diagonalisation(M):
    Cf, Cb = cf_matrix(M), cb_matrix(M)
    np.testing.assert_allclose(Cf @ Cb, np.eye(M), atol=1e-12)
    Lam = Cf @ neumann_d2(M) @ Cb
    ev = 2 - 2 * np.cos(np.arange(M) * np.pi / M)
    np.testing.assert_allclose(Lam, np.diag(ev), atol=1e-12)
    np.testing.assert_allclose(one_d_eigenvalues(M), ev, atol=1e-14)


@pytest.mark.parametrize("M", [2, 3, 5, 8])
def test_one_sided_difference_of_cosine_modes(M):
    # cos((2i-1)t) - cos((2i-3)t) = -2 sin((2i-2)t) sin(t), t = j pi / 2M
    from .test_grid import one_sided

    i = np.arange(1, M + 1)[:, None]
    t = np.arange(M)[None, :] * np.pi / (2 * M)
    expected = -4.0 * np.sin((2 * i - 2) * t) * np.sin(t) / np.sqrt(2 * M)
    np.testing.assert_allclose(one_sided(M, True) @ cb_matrix(M), expected, atol=1e-12)


def _plan(M, N, boundary="quarter", scheme="spectral"):
    return TransformPlan(GridSpec(1.7, 2.3, M, N, boundary, scheme))


@given(st.integers(2, 6), st.integers(2, 6))
def test_fast_transforms_match_dense_matrices(M, N):
    p = _plan(M, N)
    rng = np.random.default_rng(M * 10 + N)
    w = rng.standard_normal(M * N)
    W = w.reshape(N, M)
    expected = cf_matrix(N) @ W @ cf_matrix(M).T
    np.testing.assert_allclose(p.to_fourier(w), expected, atol=1e-12)
    np.testing.assert_allclose(p.from_fourier(p.to_fourier(w)), w, atol=1e-12)


@given(st.integers(2, 7), st.integers(2, 7), st.sampled_from(["quarter", "full"]))
def test_weighted_parseval(M, N, boundary):
    p = _plan(M, N, boundary)
    w = np.random.default_rng(M + 7 * N).standard_normal(M * N)
    wh = p.to_fourier(w)
    assert np.isclose(np.sum(p.parseval_weights * np.abs(wh) ** 2), w @ w, rtol=1e-12)


@given(st.integers(2, 6), st.integers(3, 6), st.sampled_from(["quarter", "full"]))
def test_spectra_diagonalise_the_operators(M, N, boundary):
    g = GridSpec(1.7, 2.3, M, N, boundary, "spectral")
    p = TransformPlan(g)
    w = np.random.default_rng(3).standard_normal(g.size)
    for op, lam in ((g.ops.axx, p.lambda_xx), (g.ops.ayy, p.lambda_yy), (g.ops.abiharm, p.lambda_biharm)):
        np.testing.assert_allclose(op(w), p.from_fourier(lam * p.to_fourier(w)), atol=1e-10 * np.abs(op(w)).max())


@given(st.integers(2, 6), st.integers(2, 6), st.sampled_from(["quarter", "full"]))
def test_spectral_mixed_derivative_identities(M, N, boundary):
    g = GridSpec(1.7, 2.3, M, N, boundary, "spectral")
    p = TransformPlan(g)
    n = g.size
    A = dense(p.apply_spectral_mixed, n)
    At = dense(p.apply_spectral_mixed_t, n)
    np.testing.assert_allclose(At, A.T, atol=1e-12 * max(np.abs(A).max(), 1))
    AxxAyy = g.ops.sparse["Axx"] @ g.ops.sparse["Ayy"]
    np.testing.assert_allclose(A.T @ A, AxxAyy.toarray(), atol=1e-10 * max(abs(AxxAyy).max(), 1))
    assert np.max(np.abs(A @ np.ones(n))) < 1e-12


def test_spectral_mixed_requires_spectral_scheme():
    p = _plan(4, 4, scheme="left")
    with pytest.raises(SchemeMismatch):
        p.apply_spectral_mixed(np.zeros(16))


@pytest.mark.parametrize("boundary", ["quarter", "full"])
@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0, 1.4, 1.9])
def test_biharmonic_and_metric_solves(boundary, lam, rng):
    g = GridSpec(20.0, 15.0, 24, 18, boundary, "left")
    p = TransformPlan(g)
    f = random_field(rng, g)
    psi = p.solve_biharmonic(f)
    assert np.max(np.abs(g.ops.abiharm(psi) - f)) <= 1e-10 * np.max(np.abs(f))
    assert abs(psi.sum()) <= 1e-12 * g.size * np.max(np.abs(psi))
    v = p.solve_metric(f, lam)
    o = g.ops
    Gv = o.abiharm(v) + o.axx(p.solve_biharmonic(o.axx(v))) - lam * o.axx(v)
    assert np.max(np.abs(Gv - f)) <= 1e-10 * np.max(np.abs(f))
    assert np.all(p.metric_symbol(lam)[p._nonconst] > 0)


def test_nonzero_mean_rhs_is_rejected():
    p = _plan(6, 6)
    with pytest.raises(NonZeroMeanRightHandSide):
        p.solve_biharmonic(np.ones(36))
    with pytest.raises(NonZeroMeanRightHandSide):
        p.solve_metric(np.ones(36) + np.arange(36), 1.0)


def test_metric_loses_positivity_beyond_two():
    # the symbol Lxx^2 + 1 - lam Lxx (for Lyy = 0) turns negative near Lxx = 1 once lam > 2
    p = TransformPlan(GridSpec(100.0, 100.0, 40, 40))
    with pytest.raises(NonPositiveMetric):
        p.metric_symbol(2.5)
