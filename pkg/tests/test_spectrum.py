import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from ringchaos.model import DuffingRingParams, RingModel, make_duffing_ring
from ringchaos.scan import duffing_mode_threshold
from ringchaos.spectrum import (CriticalPointError, continuous_spectrum, coupling_moments, critical_vectors,
                                dense_origin_spectrum, discrete_spectrum, find_critical, inner, lemma1_check,
                                max_growth, pairing_error, symbol_matrix)

A, D = 0.1, 0.3


@pytest.fixture(scope="module")
def continuum_oracle():
    """Continuum threshold from minimising the closed-form mode threshold over phi."""
    res = minimize_scalar(lambda x: float(duffing_mode_threshold(x, A, D)), bounds=(0.3, 2.5),
                          method="bounded", options={"xatol": 1e-12})
    k_c, phi0 = float(res.fun), float(res.x)
    return k_c, phi0, k_c * np.sin(phi0) / D


def test_symbol_matrix_closed_form():
    m = make_duffing_ring(DuffingRingParams(), 10)
    for k, phi in [(0.2, 0.7), (1.3, 2.9), (0.0, 4.0)]:
        expect = np.array([[0, 1], [-A - k + k * np.exp(1j * phi), -D]])
        np.testing.assert_allclose(symbol_matrix(m, k, phi), expect, atol=1e-15)


def test_symbol_matrix_at_zero_phase_is_sum():
    m = make_duffing_ring(DuffingRingParams(), 10)
    np.testing.assert_allclose(symbol_matrix(m, 0.4, 0.0), m.matrices(0.4).sum(axis=0))


def test_symbol_independent_of_phase_for_local_model():
    M0 = {0: np.array([[0.0, 1.0], [-1.0, -0.5]])}
    m = RingModel.from_matrices(M0, N=4, R=1)
    np.testing.assert_allclose(symbol_matrix(m, 0.0, 0.3), symbol_matrix(m, 0.0, 2.2))


def test_continuous_spectrum_invariants():
    m = make_duffing_ring(DuffingRingParams(), 10)
    curve = continuous_spectrum(m, 0.25, 128)
    assert curve.branches.shape == (128, 2)
    assert curve.det_residuals(m).max() < 1e-8
    steps = np.abs(np.diff(curve.branches, axis=0))
    secant = np.median(steps, axis=0)
    assert np.all(steps < 10 * np.maximum(secant, steps.max(axis=0) / 10 + 1e-15))
    with pytest.raises(ValueError):
        continuous_spectrum(m, 0.25, 8)


def test_discrete_modes_lie_on_continuum():
    m = make_duffing_ring(DuffingRingParams(), 24)
    curve = continuous_spectrum(m, 0.3, 24 * 16)
    assert curve.distance(discrete_spectrum(m, 0.3)).max() < 1e-10


@pytest.mark.parametrize("N", [4, 8, 12])
def test_dense_matches_mode_spectrum(N):
    m = make_duffing_ring(DuffingRingParams(), N)
    for k in (0.0, 0.14, 0.6):
        assert pairing_error(dense_origin_spectrum(m, k), discrete_spectrum(m, k)) < 1e-8


def test_critical_point_matches_oracle(duffing30, critical, continuum_oracle):
    k_c, phi0, omega0 = continuum_oracle
    assert abs(critical.p_c - k_c) < 1e-8
    assert abs(critical.phi0 - phi0) < 1e-5
    assert abs(critical.omega0 - omega0) < 1e-8


def test_critical_invariants(duffing30, critical):
    S = symbol_matrix(duffing30, critical.p_c, critical.phi0)
    lam = np.linalg.eigvals(S)
    assert np.min(np.abs(lam - 1j * critical.omega0)) < 1e-8
    np.testing.assert_allclose(S @ critical.v0, 1j * critical.omega0 * critical.v0, atol=1e-10)
    assert abs(np.linalg.norm(critical.v0) - 1) < 1e-10
    assert abs(inner(critical.v0, critical.v1) - 1) < 1e-10
    # tangency: growth is maximal in phi at phi0
    val, phi = max_growth(duffing30, critical.p_c)
    assert abs(val) < 1e-10
    assert min(abs(phi - critical.phi0), abs(2 * np.pi - phi - critical.phi0)) < 1e-5


def test_kappa1_value(critical):
    # lambda' = i k e^{i phi} / (d + 2 i omega); tangency forces k cos(phi0) = d^2/2, so kappa1 = d/2
    assert abs(critical.kappa1 - 0.15) < 1e-7


def test_lemma1_identity(duffing30, critical):
    assert lemma1_check(duffing30, critical) < 1e-5


def test_coupling_moments_recomputable(duffing30, critical):
    mom = coupling_moments(duffing30, critical.phi0, 0.0)
    M = duffing30.M0
    w = np.exp(1j * np.array([-1, 0, 1]) * critical.phi0)
    np.testing.assert_array_equal(mom.L0, sum(w[i] * M[i] for i in range(3)))
    np.testing.assert_array_equal(mom.L1, sum((i - 1) * w[i] * M[i] for i in range(3)))
    np.testing.assert_array_equal(mom.L2, sum((i - 1) ** 2 * w[i] * M[i] for i in range(3)))
    np.testing.assert_array_equal(mom.LK, sum(w[i] * duffing30.K[i] for i in range(3)))


def test_find_critical_requires_bracket(duffing30):
    with pytest.raises(CriticalPointError, match="bracket"):
        find_critical(duffing30, (0.0, 0.1))


def test_nonsimple_eigenvalue_rejected():
    with pytest.raises(CriticalPointError, match="regular point"):
        critical_vectors(np.array([[1j, 0], [0, 1j]]))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.0, 1.5))
def test_conjugate_symmetry(phi, k):
    m = make_duffing_ring(DuffingRingParams(), 6)
    a = np.sort_complex(np.linalg.eigvals(symbol_matrix(m, k, phi)))
    b = np.sort_complex(np.conj(np.linalg.eigvals(symbol_matrix(m, k, 2 * np.pi - phi))))
    assert pairing_error(a, b) < 1e-12
