import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cointegra.acceptance import ou_closed_forms
from cointegra.errors import GridError, InstabilityError, PreconditionError
from cointegra.kernel import (
    cubic_sample,
    default_step,
    ecf_kernel_residual,
    integral_of_f,
    laplace_check,
    solve_kernel,
    stationary_kernel_g,
    truncation_horizon,
)
from cointegra.measure import MatExpDensity, SignedMatrixMeasure
from cointegra.spectral import CharacteristicFunction, cointegration_structure

from conftest import A_COINT, C0_COINT


@pytest.mark.parametrize("which", ["ou_stat", "ou_coint"])
def test_ou_kernels_match_matrix_exponential(which, request):
    m = request.getfixturevalue(which)
    st_ = cointegration_structure(m)
    k = solve_kernel(m, st_, 1e-2, 8.0)
    ref = ou_closed_forms(m.atoms[0][1], st_.c0, k.times)
    for key in ("c_tilde", "c", "f"):
        np.testing.assert_allclose(getattr(k, key), ref[key], atol=1e-9)


def test_cointegrated_ou_kernel_entries(ou_coint):
    k = solve_kernel(ou_coint, None, 1e-2, 5.0)
    e = np.exp(-k.times)
    np.testing.assert_allclose(k.c[:, 0, 0], e, atol=1e-9)
    np.testing.assert_allclose(k.c[:, 0, 1], -e, atol=1e-9)
    np.testing.assert_allclose(k.c[:, 1], 0, atol=1e-12)
    np.testing.assert_allclose(k.c0, C0_COINT, atol=1e-12)


def test_rk4_order_on_coarse_grids(ou_coint):
    st_ = cointegration_structure(ou_coint)
    errs = []
    for h in (0.2, 0.1):
        k = solve_kernel(ou_coint, st_, h, 6.0)
        errs.append(np.abs(k.f - ou_closed_forms(A_COINT, st_.c0, k.times)["f"]).max())
    assert errs[0] / errs[1] > 12


def test_pure_delay_kernel_by_method_of_steps(pure_delay):
    # g' = -g(t - 1): g = 1 on [0, 1], g = 2 - t on [1, 2], g = 2 - t + (t-2)^2/2 on [2, 3]
    g = stationary_kernel_g(pure_delay, 1e-2, 6.0)
    assert g.at(0.5)[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert g.at(1.0)[0, 0] == pytest.approx(1.0, abs=1e-10)
    assert g.at(1.5)[0, 0] == pytest.approx(0.5, abs=1e-9)
    assert g.at(2.0)[0, 0] == pytest.approx(0.0, abs=1e-9)
    assert g.at(2.5)[0, 0] == pytest.approx(-0.5 + 0.125, abs=1e-8)


def test_pure_delay_f_steps(pure_delay):
    # f = -(g * eta) = g(t - 1) for t >= 1
    k = solve_kernel(pure_delay, None, 1e-2, 4.0)
    assert k.at(0.5, "f")[0, 0] == pytest.approx(0.0, abs=1e-12)
    assert k.at(1.5, "f")[0, 0] == pytest.approx(1.0, abs=1e-9)
    assert k.at(2.5, "f")[0, 0] == pytest.approx(0.5, abs=1e-8)


def test_stationary_g_refuses_cointegrated(ou_coint):
    with pytest.raises(PreconditionError):
        stationary_kernel_g(ou_coint, 1e-2, 2.0)


def test_atom_closer_than_one_step_is_rejected():
    m = SignedMatrixMeasure(1, ((0.005, [[-1.0]]),))
    with pytest.raises(GridError):
        solve_kernel(m, None, 1e-2, 1.0)


def test_explosive_model_is_caught():
    m = SignedMatrixMeasure(1, ((0.0, [[2.0]]),))
    with pytest.raises(InstabilityError):
        solve_kernel(m, cointegration_structure(m), 1e-2, 20.0)


def test_truncation_horizon_for_exponential_decay(ou_stat):
    T = truncation_horizon(ou_stat, 1e-8)
    assert 35 <= T <= 45
    assert truncation_horizon(SignedMatrixMeasure(1, ((0.0, [[0.0]]),)), 1e-8) == 0.0


def test_default_step_scales_with_decay_rate():
    m = SignedMatrixMeasure(1, ((0.0, [[-1.0]]),), decay_rate=0.5)
    assert default_step(m) == pytest.approx(2e-3)


def test_laplace_and_integral_identities_with_density(carma_measure):
    cf = CharacteristicFunction(carma_measure)
    st_ = cointegration_structure(cf)
    k = solve_kernel(carma_measure, st_, 5e-3, 25.0)
    rep = laplace_check(k, cf, (0.5, 1.0, 2.0, 1 + 3j), tol=1e-6)
    assert rep["pass"], rep
    np.testing.assert_allclose(np.eye(2) - integral_of_f(k, carma_measure), st_.c0, atol=1e-6)


def test_laplace_check_needs_positive_real_part(ou_stat):
    k = solve_kernel(ou_stat, None, 1e-2, 5.0)
    with pytest.raises(ValueError):
        laplace_check(k, ou_stat, (0.0,))


def test_error_correction_identity_for_kernel(ou_coint):
    k = solve_kernel(ou_coint, None, 1e-3, 6.0)
    res = ecf_kernel_residual(k, ou_coint, [(0.5, 2.0), (1.0, 5.0), (0.0, 3.0)])
    assert np.abs(res).max() < 1e-6


def test_derivative_consistency(ou_coint):
    k = solve_kernel(ou_coint, None, 1e-3, 5.0)
    assert k.derivative_consistency() < 1e-5


def test_csv_rows_layout(ou_coint):
    k = solve_kernel(ou_coint, None, 0.1, 1.0)
    header, rows = k.csv_rows()
    assert header[0] == "t" and len(header) == 1 + 3 * 4
    assert rows.shape == (11, 13)
    np.testing.assert_allclose(rows[:, 0], k.times)


@settings(max_examples=30, deadline=None)
@given(coeffs=st.lists(st.floats(-5, 5), min_size=4, max_size=4), x=st.floats(0, 19))
def test_cubic_sampling_is_exact_for_cubics(coeffs, x):
    grid = np.arange(21, dtype=float)
    vals = np.polyval(coeffs, grid)[:, None, None]
    got = cubic_sample(vals, x)[0, 0]
    assert got == pytest.approx(np.polyval(coeffs, x), abs=1e-9 * (1 + np.abs(vals).max()))


def test_cubic_sampling_respects_breaks():
    grid = np.arange(11, dtype=float)
    vals = np.where(grid < 5, 0.0, grid - 5)[:, None, None]
    # the kink at index 5 is a break, so each side is reproduced exactly
    assert cubic_sample(vals, 4.5, breaks=(5,))[0, 0] == pytest.approx(0.0, abs=1e-14)
    assert cubic_sample(vals, 5.5, breaks=(5,))[0, 0] == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=10, deadline=None)
@given(scale=st.floats(0.5, 2.0))
def test_kernel_linear_in_time_scale(scale):
    # eta = -scale delta_0 has C~ = exp(-scale t)
    m = SignedMatrixMeasure(1, ((0.0, [[-scale]]),))
    k = solve_kernel(m, None, 1e-2, 4.0)
    np.testing.assert_allclose(k.c_tilde[:, 0, 0], np.exp(-scale * k.times), atol=1e-8)


def test_two_state_density_model():
    d = MatExpDensity([[1.0, 0.0]], [[-2.0, 1.0], [0.0, -3.0]], [[0.0], [1.0]])
    m = SignedMatrixMeasure(1, ((0.0, [[-1.5]]),), d)
    cf = CharacteristicFunction(m)
    k = solve_kernel(m, None, 5e-3, 30.0)
    assert laplace_check(k, cf, (0.5, 2.0, 1 + 1j), tol=1e-6)["pass"]
