import cmath
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from btloc.discretize import assemble_airy_1d, assemble_schrodinger_1d, uniform_grid
from btloc.eigensolve import (
    ArnoldiNoConvergence,
    DenseEigError,
    EigenPair,
    SingularFactorError,
    dense_eig,
    dense_eigvec,
    shift_invert_arnoldi,
    sparse_lu,
    tridiagonal_inverse_iteration,
    twisted_eigenvector,
)
from btloc.model import polynomial_potential, quadratic_potential
from btloc.specfn import airy_zero

E3 = cmath.exp(1j * math.pi / 3)


def random_complex_symmetric(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (b + b.T) / 2


def test_lu_reconstruction_and_solve():
    g = uniform_grid(0, 20, 500)
    m = assemble_airy_1d(1.0, g)
    lu = sparse_lu(m)
    assert lu.reconstruction_error() <= 1e-14
    b = np.random.default_rng(0).standard_normal(500) + 0j
    x = lu.solve(b)
    assert np.linalg.norm(m @ x - b) <= 1e-12 * np.linalg.norm(b)
    assert lu.fill >= 0 and lu.fill_ratio >= 1.0


def test_lu_permutations_are_permutations():
    a = sp.csc_matrix(random_complex_symmetric(60, 3))
    lu = sparse_lu(a)
    for p in (lu.row_permutation(), lu.col_permutation()):
        d = p.toarray()
        assert np.all(d.sum(axis=0) == 1) and np.all(d.sum(axis=1) == 1)


def test_singular_matrix_detected():
    a = sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 4.0]], dtype=complex))
    with pytest.raises(SingularFactorError):
        sparse_lu(a)
    with pytest.raises(SingularFactorError):
        shift_invert_arnoldi(sp.identity(5, format="csc"), 1.0)


def test_lu_rejects_rectangular():
    with pytest.raises(ValueError):
        sparse_lu(sp.csc_matrix(np.ones((2, 3))))


@pytest.mark.parametrize("seed", range(5))
def test_arnoldi_matches_dense_oracle(seed):
    a = random_complex_symmetric(200, seed)
    rng = np.random.default_rng(100 + seed)
    shift = complex(rng.normal(scale=3), rng.normal(scale=3))
    pairs = shift_invert_arnoldi(sp.csc_matrix(a), shift, k=5, seed=seed)
    dense = dense_eig(a)
    ref = dense[np.argsort(np.abs(dense - shift))[:5]]
    got = np.array([p.value for p in pairs])
    assert np.max(np.abs(got - ref)) <= 1e-8
    assert all(p.residual <= 1e-10 for p in pairs)
    # sorted by distance to the shift
    d = np.abs(got - shift)
    assert np.all(np.diff(d) >= 0)


def test_arnoldi_eigenvectors_unit_and_accurate():
    g = uniform_grid(0, 40, 2000)
    m = assemble_airy_1d(1.0, g)
    pairs = shift_invert_arnoldi(m, 0.0, k=3)
    for n, p in enumerate(pairs, start=1):
        assert np.linalg.norm(p.vector) == pytest.approx(1.0)
        assert np.linalg.norm(m @ p.vector - p.value * p.vector) == pytest.approx(p.residual, abs=1e-14)
        assert abs(p.value - abs(airy_zero(n)) * E3) <= 4e-4  # O(dy^2) discretization


def test_start_vector_and_determinism():
    g = uniform_grid(-1, 1, 600)
    m = assemble_schrodinger_1d(0.02, quadratic_potential(), g)
    shift = cmath.exp(1j * math.pi / 4) * 0.02
    a = shift_invert_arnoldi(m, shift, k=2, seed=4)
    b = shift_invert_arnoldi(m, shift, k=2, seed=4)
    assert [p.value for p in a] == [p.value for p in b]
    gauss = np.exp(-np.exp(1j * math.pi / 4) * g.nodes ** 2 / 0.04)
    c = shift_invert_arnoldi(m, shift, k=1, v0=gauss)
    assert abs(c[0].value - a[0].value) <= 1e-12
    with pytest.raises(ValueError):
        shift_invert_arnoldi(m, shift, v0=np.zeros(600))


def test_argument_checks():
    m = sp.identity(4, format="csc") * 2.0
    with pytest.raises(ValueError):
        shift_invert_arnoldi(m, 0.0, k=5)
    with pytest.raises(ValueError):
        shift_invert_arnoldi(m, 0.0, tol=1e-14)


def test_small_invariant_subspace():
    # diagonal matrix: the Krylov space of a unit vector is one-dimensional
    m = sp.diags(np.arange(1.0, 11.0)).tocsc()
    pairs = shift_invert_arnoldi(m, 0.3, k=3, v0=np.eye(10)[0])
    assert [round(p.value.real, 12) for p in pairs] == [1.0, 2.0, 3.0]


def test_residual_floor_scales_with_norm():
    # ||M|| ~ 1.6e6: residuals of 1e-10 are below round-off, the floor applies
    n = 4000
    g = uniform_grid(0, math.pi, n)
    m = assemble_schrodinger_1d(1.0, polynomial_potential((0.0,)), g)
    pairs = shift_invert_arnoldi(m, 0.5, k=3)
    dx = math.pi / (n + 1)
    exact = 4 / dx ** 2 * np.sin(np.arange(1, 4) * dx / 2) ** 2
    assert np.max(np.abs(np.array([p.value for p in pairs]) - exact)) <= 1e-8
    assert max(p.residual for p in pairs) > 1e-10


def test_no_convergence_reports_partial():
    a = sp.csc_matrix(random_complex_symmetric(300, 9))
    with pytest.raises(ArnoldiNoConvergence) as info:
        shift_invert_arnoldi(a, 0.1, k=40, ncv=41, max_restarts=0, tol=1e-12)
    assert info.value.partial is not None


def test_dense_limits():
    with pytest.raises(ValueError):
        dense_eig(np.zeros((2001, 2001)))
    with pytest.raises(ValueError):
        dense_eig(np.eye(5), max_n=4)
    assert np.allclose(dense_eig(np.eye(5), max_n=5), 1.0)
    with pytest.raises(ValueError):
        dense_eig(np.zeros((2, 3)))
    with pytest.raises((DenseEigError, ValueError)):
        dense_eig(np.full((3, 3), np.nan))


def test_dense_eig_ordering():
    w = dense_eig(np.diag([3.0, -1.0, 1j, 2.0]))
    assert np.allclose(w, [1j, -1.0, 2.0, 3.0])


def test_dense_eigvec():
    a = random_complex_symmetric(50, 2)
    lam = dense_eig(a)[0]
    x = dense_eigvec(a, lam)
    assert np.linalg.norm(a @ x - lam * x) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_twisted_eigenvector_matches_dense(seed):
    rng = np.random.default_rng(seed)
    n = 40
    d = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    o = rng.standard_normal(n - 1) + 1j * rng.standard_normal(n - 1) + 2.0
    a = np.diag(d) + np.diag(o, 1) + np.diag(o, -1)
    w, v = np.linalg.eig(a)
    i = int(np.argmin(np.abs(w)))
    pair = twisted_eigenvector(d, o, w[i])
    f = pair.vector * np.exp(pair.log_scale)
    f /= np.linalg.norm(f)
    ref = v[:, i] / np.linalg.norm(v[:, i])
    c = np.vdot(ref, f)
    assert np.linalg.norm(f - c * ref) <= 1e-6
    assert pair.residual <= 1e-8


def test_twisted_eigenvector_resolves_deep_tails():
    # the ground state of (hD)^2 + iV with V = 1 outside a well decays by e^{-c/h}
    h = 2.0 ** -9
    g = uniform_grid(-2, 2, 4000)
    v = polynomial_potential((0, 0, 1.0, 0, 0))
    m = assemble_schrodinger_1d(h, v, g)
    lam = shift_invert_arnoldi(m, cmath.exp(1j * math.pi / 4) * h, k=1)[0].value
    pair = twisted_eigenvector(m.diagonal(), m.diagonal(1), lam)
    assert pair.log_scale.min() < -710  # below the smallest normal double
    assert pair.residual <= 1e-10
    assert np.all(np.isfinite(pair.vector))


def test_tridiagonal_inverse_iteration():
    g = uniform_grid(0, 12, 800)
    m = assemble_airy_1d(2.0, g)
    lam, x = tridiagonal_inverse_iteration(m.diagonal(), m.diagonal(1), 2.0 ** (2 / 3) * 2.3 * E3,
                                           iterations=8)
    assert abs(lam - 2.0 ** (2 / 3) * abs(airy_zero(1)) * E3) <= 1e-3
    assert np.linalg.norm(m @ x - lam * x) <= 1e-8


def test_eigenpair_container():
    p = EigenPair(1j, np.ones(2), 0.0)
    assert p.log_scale is None
