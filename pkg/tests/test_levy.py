import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cointegra.errors import CholeskyError, WindowError, XiError
from cointegra.kernel import solve_kernel
from cointegra.levy import (
    DiscreteJumps,
    GaussianJumps,
    LevyModel,
    covariance_factor,
    ecf_residual,
    granger_path,
    project_xi,
    sample_levy,
    simulate_ensemble,
    variance_profile,
    window_moments,
)
from cointegra.spectral import cointegration_structure


@pytest.fixture(scope="module")
def coint_setup(ou_coint):
    st_ = cointegration_structure(ou_coint)
    return ou_coint, st_, solve_kernel(ou_coint, st_, 1e-2, 20.0)


def test_same_seed_same_increments():
    m = LevyModel(2)
    a = sample_levy(m, 0.01, (10.0, 10.0), 7, 3)
    b = sample_levy(m, 0.01, (10.0, 10.0), 7, 3)
    np.testing.assert_array_equal(a.increments, b.increments)
    c = sample_levy(m, 0.01, (10.0, 10.0), 7, 4)
    assert not np.array_equal(a.increments, c.increments)


def test_sub_window_reproduces_the_same_draws():
    m = LevyModel(2)
    big = sample_levy(m, 0.01, (50.0, 50.0), 7)
    small = sample_levy(m, 0.01, (10.0, 20.0), 7)
    np.testing.assert_array_equal(small.increments, big.increments[4000:7000])


def test_adjacent_blocks_differ():
    inc = sample_levy(LevyModel(1), 1.0, (0.0, 3 * 4096), 0).increments[:, 0]
    assert not np.array_equal(inc[:4096], inc[4096:8192])


def test_gaussian_increment_covariance():
    cov = np.array([[1.0, 0.3], [0.3, 0.5]])
    x = sample_levy(LevyModel(2, gaussian_cov=cov), 1e-3, (0.0, 200.0), 1).increments / np.sqrt(1e-3)
    np.testing.assert_allclose(np.cov(x.T), cov, atol=0.02)


def test_compound_poisson_counts_and_variance():
    model = LevyModel(1, gaussian_cov=[[0.0]], jump_rate=2.0, jumps=DiscreteJumps([[1.0], [-1.0]], [0.5, 0.5]))
    g = sample_levy(model, 0.01, (0.0, 500.0), 3)
    total = g.jump_counts.sum()
    assert abs(total - 1000) < 4 * np.sqrt(1000)
    assert model.sigma[0, 0] == pytest.approx(2.0)
    # each increment is a sum of +-1 jumps, so the parity matches the count
    np.testing.assert_array_equal(np.abs(g.increments[:, 0]) % 2, g.jump_counts % 2)


def test_gaussian_jumps_second_moment():
    j = GaussianJumps([1.0], [[2.0]])
    assert j.second_moment()[0, 0] == pytest.approx(3.0)


def test_covariance_factor_rejects_indefinite():
    with pytest.raises(CholeskyError):
        covariance_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))
    np.testing.assert_array_equal(covariance_factor(np.zeros((2, 2))), 0)


def test_coarsen_sums_increments():
    g = sample_levy(LevyModel(1), 0.01, (1.0, 1.0), 5)
    c = g.coarsen(2)
    np.testing.assert_allclose(c.increments[:, 0], g.increments[:, 0].reshape(-1, 2).sum(axis=1))
    np.testing.assert_allclose(c.levels()[-1], g.levels()[-1])


def test_xi_shift_is_exact(coint_setup):
    m, st_, k = coint_setup
    incr = sample_levy(LevyModel(2), 1e-2, (40.0, 10.0), 2)
    a = granger_path(k, st_, incr, np.zeros(2))
    b = granger_path(k, st_, incr, [3.0, 3.0])
    np.testing.assert_allclose(b.X - a.X, 3.0, atol=1e-13)


def test_xi_must_lie_in_null_space(coint_setup):
    m, st_, k = coint_setup
    incr = sample_levy(LevyModel(2), 1e-2, (40.0, 10.0), 2)
    with pytest.raises(XiError):
        granger_path(k, st_, incr, [1.0, 0.0])
    np.testing.assert_allclose(st_.pi0 @ project_xi(st_, [1.0, 0.0]), 0, atol=1e-14)


def test_short_burn_in_raises(coint_setup):
    m, st_, k = coint_setup
    incr = sample_levy(LevyModel(2), 1e-2, (5.0, 10.0), 2)
    with pytest.raises(WindowError):
        granger_path(k, st_, incr)


@settings(max_examples=10, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_path_is_linear_in_increments(coint_setup, a, b):
    m, st_, k = coint_setup
    i1 = sample_levy(LevyModel(2), 1e-2, (40.0, 5.0), 1)
    i2 = sample_levy(LevyModel(2), 1e-2, (40.0, 5.0), 2)
    combo = granger_path(k, st_, i1.scaled(a) + i2.scaled(b))
    sep = a * granger_path(k, st_, i1).X + b * granger_path(k, st_, i2).X
    np.testing.assert_allclose(combo.X, sep, atol=1e-10)


def test_second_coordinate_is_the_driving_noise(coint_setup):
    # row two of the cointegrated OU is dX_2 = dZ_2
    m, st_, k = coint_setup
    p = granger_path(k, st_, sample_levy(LevyModel(2), 1e-2, (40.0, 10.0), 4), [3.0, 3.0])
    np.testing.assert_allclose(p.X[:, 1] - 3.0, p.Z[:, 1], atol=1e-12)


def test_ecf_residual_is_small(coint_setup):
    m, st_, k = coint_setup
    p = granger_path(k, st_, sample_levy(LevyModel(2), 1e-2, (45.0, 10.0), 4))
    r = ecf_residual(p, m, 2.0, 7.0)
    assert np.abs(r).max() < 0.1


def test_ensemble_is_thread_count_invariant(coint_setup, monkeypatch):
    m, st_, k = coint_setup
    monkeypatch.setenv("COINTEGRA_THREADS", "1")
    one = simulate_ensemble(k, st_, LevyModel(2), 6, 5.0, 9)
    monkeypatch.setenv("COINTEGRA_THREADS", "4")
    four = simulate_ensemble(k, st_, LevyModel(2), 6, 5.0, 9)
    assert [p.path_id for p in four] == list(range(6))
    for a, b in zip(one, four):
        np.testing.assert_array_equal(a.X, b.X)


def test_cointegrating_direction_has_stationary_windows(coint_setup):
    m, st_, k = coint_setup
    p = granger_path(k, st_, sample_levy(LevyModel(2), 1e-2, (40.0, 400.0), 6))
    spread = p.X[p.index(0.0):] @ np.array([-1.0, 1.0])
    means, vars_, sems = window_moments(spread, 4)
    # stationary spread: window means agree within a few (autocorrelated) standard errors
    # and window variances stay near the stationary value: dY = -Y dt + d(Z_2 - Z_1) gives Var Y = 2 / 2
    assert np.all(np.abs(means - means.mean()) < 0.35)
    np.testing.assert_allclose(vars_, 1.0, rtol=0.3)


def test_variance_profile_slopes(coint_setup):
    m, st_, k = coint_setup
    ens = simulate_ensemble(k, st_, LevyModel(2), 200, 20.0, 1)
    _, var, slope = variance_profile(ens, [0.0, 1.0])
    assert var[0] == 0.0
    assert 0.7 < slope < 1.3
    assert abs(variance_profile(ens, [-1.0, 1.0])[2]) < 0.05
