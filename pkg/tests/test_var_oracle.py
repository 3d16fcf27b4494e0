import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cointegra.errors import LagError, RootError, XiError
from cointegra.measure import MatExpDensity, SignedMatrixMeasure
from cointegra.var_oracle import (
    VARSpec,
    cointegration_angles,
    discretization_bridge,
    root_mapping,
    series_identity_error,
    simulate_var,
    var_ecf,
    var_granger,
)

HALF = np.full((2, 2), 0.5)


def test_ecf_form():
    pi0, pis = var_ecf(VARSpec(1, 2, ([[1.5]], [[-0.5]])))
    assert pi0[0, 0] == pytest.approx(0.0)
    assert pis[0][0, 0] == pytest.approx(0.5)
    pi0, pis = var_ecf(VARSpec(2, 1, (np.zeros((2, 2)),)))
    np.testing.assert_array_equal(pi0, -np.eye(2))
    assert pis == []


def test_bivariate_closed_form():
    rep = var_granger(VARSpec(2, 1, (HALF,)))
    assert rep.rank_r == 1
    np.testing.assert_allclose(rep.pi0, [[-0.5, 0.5], [0.5, -0.5]])
    np.testing.assert_allclose(rep.c0_disc, HALF, atol=1e-12)
    np.testing.assert_allclose(rep.c_coeffs[0], [[0.5, -0.5], [-0.5, 0.5]], atol=1e-12)
    np.testing.assert_allclose(rep.c_coeffs[1:], 0, atol=1e-12)
    np.testing.assert_allclose(rep.pi0 @ rep.c0_disc, 0, atol=1e-12)


def test_ar1_geometric_series():
    rep = var_granger(VARSpec(1, 1, ([[0.5]],)), tol=1e-12)
    js = np.arange(rep.J + 1)
    np.testing.assert_allclose(rep.c_coeffs[:, 0, 0], 0.5**js, rtol=1e-14)
    assert rep.tail_bound <= 1e-12


def test_explosive_root_rejected():
    with pytest.raises(RootError):
        var_granger(VARSpec(1, 1, ([[1.2]],)))
    with pytest.raises(RootError):
        var_granger(VARSpec(1, 1, ([[-1.0]],)))


def test_random_walk_path_is_cumulative_noise():
    spec = VARSpec(1, 1, ([[1.0]],))
    rep = var_granger(spec)
    out = simulate_var(spec, rep, [2.0], 50, seed=3)
    assert out["max_deviation"] <= 1e-12
    steps = np.diff(out["granger"][:, 0])
    assert np.all(np.isfinite(steps))


def test_bivariate_recursion_matches_granger():
    spec = VARSpec(2, 1, (HALF,))
    out = simulate_var(spec, var_granger(spec), [1.0, 1.0], 500, seed=1)
    assert out["max_deviation"] <= 1e-10


def test_bad_xi():
    spec = VARSpec(2, 1, (HALF,))
    with pytest.raises(XiError):
        simulate_var(spec, var_granger(spec), [1.0, 0.0], 10, seed=1)


def test_ar1_autocorrelation():
    spec = VARSpec(1, 1, ([[0.5]],))
    out = simulate_var(spec, var_granger(spec), [0.0], 100_000, seed=2)
    x = out["recursion"][:, 0]
    rho = np.corrcoef(x[:-1], x[1:])[0, 1]
    se = np.sqrt((1 - 0.25) / len(x))  # Bartlett: Var(rho_hat) ~ (1 - rho^2) / N
    assert abs(rho - 0.5) < 3 * se


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_series_identity_on_random_cointegrated_var(seed):
    rng = np.random.default_rng(seed)
    n, p = 2, 2
    # Gamma(1) = alpha beta' rank one; remaining roots shrunk inside the disk
    alpha, beta = rng.standard_normal((n, 1)) * 0.3, rng.standard_normal((n, 1))
    G2 = 0.2 * rng.standard_normal((n, n))
    G1 = np.eye(n) + alpha @ beta.T - G2
    spec = VARSpec(n, p, (G1, G2))
    try:
        rep = var_granger(spec, tol=1e-12)
    except RootError:
        return
    zs = 0.9 * np.sqrt(rng.uniform(size=16)) * np.exp(2j * np.pi * rng.uniform(size=16))
    for z in zs:
        assert series_identity_error(spec, rep, z) <= rep.tail_bound + 1e-10
    np.testing.assert_allclose(rep.pi0 @ rep.c0_disc, 0, atol=1e-10)


def test_bridge_atom_at_zero_is_euler():
    A = np.array([[-1.0, 1.0], [0.0, 0.0]])
    m = SignedMatrixMeasure(2, ((0.0, A),))
    spec = discretization_bridge(m, 1e-2, 4)
    assert spec.p == 1
    np.testing.assert_allclose(spec.gammas[0], np.eye(2) + 1e-2 * A)
    assert np.max(cointegration_angles(m, spec)) <= 1e-12


def test_bridge_delay_lags():
    m = SignedMatrixMeasure(1, ((1.0, [[-1.0]]),), decay_rate=0.25)
    spec = discretization_bridge(m, 1e-2, 120)
    assert spec.p == 101
    assert spec.gammas[0][0, 0] == 1.0
    assert spec.gammas[100][0, 0] == pytest.approx(-1e-2)
    with pytest.raises(LagError):
        discretization_bridge(m, 1e-2, 50)


def test_bridge_preserves_density_mass():
    d = MatExpDensity([[1.0]], [[-2.0]], [[1.0]])
    m = SignedMatrixMeasure(1, ((0.0, [[-1.0]]),), d)
    spec = discretization_bridge(m, 1e-2, 1200)
    total = sum(G[0, 0] for G in spec.gammas) - 1
    assert total / 1e-2 == pytest.approx(-1 + 0.5, abs=1e-6)


def test_root_mapping_second_order(pure_delay):
    devs = []
    for h in (2e-2, 1e-2):
        spec = discretization_bridge(pure_delay, h, int(round(1 / h)) + 1)
        devs.append(root_mapping(pure_delay, spec, h, 5)["max_deviation"])
    assert 3.0 < devs[0] / devs[1] < 5.0
