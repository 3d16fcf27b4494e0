import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import lambertw

from cointegra.errors import DomainError, ScanResolutionError, SingularError
from cointegra.measure import SignedMatrixMeasure
from cointegra.spectral import (
    COINTEGRATED,
    REJECTED,
    STATIONARY,
    CharacteristicFunction,
    c0_residue_numeric,
    cauchy_riemann_error,
    check_conditions,
    cointegration_structure,
    count_zeros,
    long_run_matrix,
    null_bases,
    refine_zero,
)

from conftest import C0_COINT


def atoms(A, t=0.0):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return SignedMatrixMeasure(A.shape[0], ((t, A),))


def test_cointegrated_ou_structure(ou_coint):
    rep = check_conditions(ou_coint)
    assert rep.verdict == COINTEGRATED
    assert rep.route_a_pass and rep.route_b_pass and rep.routes_agree
    st_ = cointegration_structure(ou_coint)
    assert st_.rank_r == 1
    np.testing.assert_allclose(st_.c0, C0_COINT, atol=1e-12)
    np.testing.assert_allclose(c0_residue_numeric(ou_coint), C0_COINT, atol=1e-8)
    np.testing.assert_allclose(st_.pi0 @ st_.c0, 0, atol=1e-12)


def test_stationary_models(ou_stat, pure_delay):
    assert check_conditions(ou_stat).verdict == STATIONARY
    np.testing.assert_array_equal(cointegration_structure(ou_stat).c0, 0)
    assert check_conditions(pure_delay).verdict == STATIONARY


def test_random_walk_is_cointegrated_with_identity_c0():
    m = atoms([[0.0]])
    assert check_conditions(m).verdict == COINTEGRATED
    assert cointegration_structure(m).c0[0, 0] == pytest.approx(1.0)


def test_zero_in_right_half_plane_is_rejected():
    rep = check_conditions(atoms([[1.0]]))
    assert rep.verdict == REJECTED
    assert rep.zero_count_right_halfplane == 1


def test_double_pole_is_rejected():
    m = atoms([[0.0, 1.0], [0.0, 0.0]])
    assert check_conditions(m).verdict == REJECTED
    with pytest.raises(SingularError):
        cointegration_structure(m)


def test_epsilon_outside_range_raises(ou_stat):
    with pytest.raises(DomainError):
        check_conditions(ou_stat, epsilon=2.0)


def test_zero_count_matches_companion_eigenvalues():
    rng = np.random.default_rng(4)
    for _ in range(5):
        roots = rng.uniform(-2, 2, 4) + 1j * rng.uniform(-3, 3, 4)
        roots = np.concatenate([roots, roots.conj()])
        coeffs = np.poly(roots).real
        det = lambda zs, c=coeffs: np.polyval(c, zs)  # noqa: E731
        found = np.roots(coeffs)
        eps = 0.3
        inside = np.sum((found.real > -eps) & (np.abs(found.imag) < 10))
        if np.min(np.abs(found.real + eps)) < 1e-3:
            continue
        assert count_zeros(det, eps, 10.0, rho=None)["count"] == inside


def test_delay_zeros_are_lambert_branches(pure_delay):
    for k in (0, 1, 2):
        w = complex(lambertw(-1.0, k))
        z = refine_zero(CharacteristicFunction(pure_delay), w + 0.05)
        assert abs(z - w) < 1e-10


def test_cauchy_riemann_holds(carma_measure):
    cf = CharacteristicFunction(carma_measure)
    for z in (0.5 + 0.5j, 2 - 1j):
        assert cauchy_riemann_error(cf, z) < 1e-6


def test_long_run_matrix_singular_core():
    a = np.array([[1.0], [0.0]])
    with pytest.raises(SingularError):
        long_run_matrix(a, a, np.array([[0.0, 0.0], [0.0, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), r=st.integers(1, 2))
def test_null_bases_annihilate_and_c0_is_basis_free(seed, r):
    rng = np.random.default_rng(seed)
    n = 3
    M = rng.standard_normal((n, r)) @ rng.standard_normal((r, n))
    rank, alpha, beta, a_perp, b_perp = null_bases(M)
    assert rank == r
    np.testing.assert_allclose(alpha @ beta.T, M, atol=1e-10)
    np.testing.assert_allclose(a_perp.T @ M, 0, atol=1e-10)
    np.testing.assert_allclose(M @ b_perp, 0, atol=1e-10)
    middle = np.eye(n) + 0.1 * rng.standard_normal((n, n))
    c0 = long_run_matrix(a_perp, b_perp, middle)
    # any invertible change of basis of the null spaces leaves C0 unchanged
    for _ in range(5):
        S = rng.standard_normal((n - r, n - r)) + 2 * np.eye(n - r)
        T = rng.standard_normal((n - r, n - r)) + 2 * np.eye(n - r)
        c0_new = long_run_matrix(a_perp @ S, b_perp @ T, middle)
        np.testing.assert_allclose(c0_new, c0, atol=1e-10 * (1 + np.abs(c0).max()))


@settings(max_examples=15, deadline=None)
@given(a=st.floats(0.6, 3.0))
def test_routes_agree_on_cointegrated_ou_family(a):
    m = atoms([[-a, a], [0.0, 0.0]])
    rep = check_conditions(m)
    assert rep.verdict == COINTEGRATED
    np.testing.assert_allclose(c0_residue_numeric(m), cointegration_structure(m).c0, atol=1e-7)


def test_slow_zero_depends_on_decay_rate():
    # the nonzero zero sits at -0.3: inside the default strip Re > -0.5, outside Re > -0.1
    A = [[-0.3, 0.3], [0.0, 0.0]]
    assert check_conditions(atoms(A)).verdict == REJECTED
    slow = SignedMatrixMeasure(2, ((0.0, np.array(A)),), decay_rate=0.2)
    assert check_conditions(slow).verdict == COINTEGRATED


def test_zero_on_the_contour_is_inconclusive():
    # default epsilon is 0.5 and the zero is exactly at -0.5
    with pytest.raises(ScanResolutionError):
        check_conditions(atoms([[-0.5, 0.5], [0.0, 0.0]]))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_route_equivalence_on_random_measures(seed):
    from hypothesis import assume

    from cointegra.measure import MatExpDensity

    rng = np.random.default_rng(seed)
    n = 2
    A = rng.standard_normal((n, n))
    if rng.uniform() < 0.5:
        # force a rank-one level matrix so that the origin is a zero
        u, v = rng.standard_normal(n), rng.standard_normal(n)
        A = np.outer(u, v)
    F = -np.diag(rng.uniform(1.5, 3.0, 2))
    H = 0.5 * rng.standard_normal((n, 2))
    G = 0.5 * rng.standard_normal((2, n))
    d = MatExpDensity(H, F, G)
    m = SignedMatrixMeasure(n, ((0.0, A - d.total()),), d)
    try:
        rep = check_conditions(m)
    except ScanResolutionError:
        assume(False)
    assert rep.route_a_pass == rep.route_b_pass
    if rep.zero_at_origin:
        # the analytic pole test and the algebraic test must agree on their own
        try:
            cointegration_structure(m)
            algebraic = True
        except SingularError:
            algebraic = False
        assert rep.pole_simple == algebraic
