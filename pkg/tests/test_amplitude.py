import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringchaos.amplitude import (NonresonanceError, NotCubicError, gl_coefficients, probe_cubic,
                                 reconstruct, resonance_matrix, trig_interpolate)
from ringchaos.glsolver import GLField
from ringchaos.model import DuffingRingParams, RingModel, make_duffing_ring
from ringchaos.spectrum import (CriticalData, coupling_moments, critical_vectors, find_critical, inner,
                                symbol_matrix)


def test_probe_duffing_closed_form(duffing30, critical):
    h1, h2 = probe_cubic(duffing30, critical.v0, critical.phi0)
    v = critical.v0[0]
    np.testing.assert_allclose(h1, [0, -3 * v * abs(v) ** 2], atol=1e-8)
    np.testing.assert_allclose(h2, [0, -v**3], atol=1e-8)


def test_probe_zero_nonlinearity():
    base = make_duffing_ring(DuffingRingParams(), 6)
    lin = RingModel(n=2, N=6, R=1, M0=base.M0, K=base.K, cubic=np.zeros((2, 2)))
    h1, h2 = probe_cubic(lin, np.array([0.6, 0.8j]), 1.0)
    assert np.all(h1 == 0) and np.all(h2 == 0)


def test_probe_difference_coupling(rng):
    base = make_duffing_ring(DuffingRingParams(), 6)
    h = lambda W, p: np.stack([np.zeros_like(W[..., 1, 0]), -(W[..., 2, 0] - W[..., 1, 0]) ** 3], axis=-1)
    m = RingModel(n=2, N=6, R=1, M0=base.M0, K=base.K, nonlinearity=h)
    v0 = np.array([0.6 + 0.2j, 0.3 - 0.7j])
    phi0 = 0.9
    w = (np.exp(1j * phi0) - 1) * v0[0]
    h1, h2 = probe_cubic(m, v0, phi0)
    np.testing.assert_allclose(h1, [0, -3 * abs(w) ** 2 * w], atol=1e-8)
    np.testing.assert_allclose(h2, [0, -(w**3)], atol=1e-8)


def test_probe_rejects_quadratic():
    # small enough to pass the model's zero-derivative check, but not cubic
    base = make_duffing_ring(DuffingRingParams(), 6)
    h = lambda W, p: np.stack([np.zeros_like(W[..., 1, 0]), -1e-3 * W[..., 1, 0] ** 2 - W[..., 1, 0] ** 3], axis=-1)
    m = RingModel(n=2, N=6, R=1, M0=base.M0, K=base.K, nonlinearity=h)
    with pytest.raises(NotCubicError, match="not cubic"):
        probe_cubic(m, np.array([1.0, 0.0]), 0.5)


def test_probe_rejects_quintic():
    base = make_duffing_ring(DuffingRingParams(), 6)
    h = lambda W, p: np.stack([np.zeros_like(W[..., 1, 0]), -W[..., 1, 0] ** 3 - 1e3 * W[..., 1, 0] ** 5], axis=-1)
    m = RingModel(n=2, N=6, R=1, M0=base.M0, K=base.K, nonlinearity=h)
    with pytest.raises(NotCubicError, match="not cubic"):
        probe_cubic(m, np.array([1.0, 0.0]), 0.5)


def test_coefficient_invariants(duffing30, critical, coeffs):
    mom = coupling_moments(duffing30, critical.phi0, critical.p_c)
    assert coeffs.kappa2 == inner(mom.LK @ coeffs.v0, coeffs.v1)
    assert coeffs.kappa3 == inner(mom.L2 @ coeffs.v0, coeffs.v1)
    assert coeffs.zeta == inner(coeffs.h1_v0, coeffs.v1)
    res = resonance_matrix(duffing30, critical) @ coeffs.v2 - coeffs.h2_v0
    assert np.linalg.norm(res) < 1e-10
    L0v = symbol_matrix(duffing30, critical.p_c, critical.phi0) @ coeffs.v0
    assert np.linalg.norm(1j * coeffs.omega0 * coeffs.v0 - L0v) < 1e-10


def test_duffing_coefficients(coeffs):
    assert all(np.isfinite([coeffs.kappa2, coeffs.kappa3, coeffs.zeta]))
    assert coeffs.zeta.real < 0
    assert coeffs.kappa2.real > 0
    # L2 = L1 here since only m = 0, 1 carry weight, so kappa3 equals kappa1
    assert abs(coeffs.kappa3 - coeffs.kappa1) < 1e-8


def test_symmetric_coupling_gives_real_coefficients():
    # damping modulated by symmetric coupling peaks at cos(phi0) = 1/4
    z = lambda c: [[0, 0], [0, c]]
    M0 = {0: [[0, 1], [-1.0, -0.3]], 1: z(0.1), -1: z(0.1), 2: z(-0.1), -2: z(-0.1)}
    m = RingModel.from_matrices(M0, {0: z(1.0)}, N=20, cubic=np.array([[0, 0], [-1, 0]]))
    crit = find_critical(m, (0.0, 1.0))
    assert abs(np.cos(crit.phi0) - 0.25) < 1e-6
    c = gl_coefficients(m, crit)
    assert abs(c.kappa2.imag) < 1e-12
    assert abs(c.kappa3.imag) < 1e-12


def test_identity_parameter_gives_unit_kappa2():
    M0 = {0: [[-0.2, 1.0], [-1.0, -0.2]], 1: [[0.05, 0.0], [0.0, 0.05]], -1: [[0.05, 0.0], [0.0, 0.05]]}
    K = {0: np.eye(2)}
    m = RingModel.from_matrices(M0, K, N=20, cubic=np.array([[-1.0, 0.0], [0.0, -1.0]]))
    crit = find_critical(m, (0.0, 1.0))
    c = gl_coefficients(m, crit)
    assert abs(c.kappa2 - 1) < 1e-12


def test_nonresonance_violation():
    # undamped node frequencies 1 and 3 put 3 i omega0 in the spectrum
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    L0 = np.kron(np.diag([1.0, 3.0]), rot)
    m = RingModel.from_matrices({0: L0}, {0: np.eye(4)}, N=4, cubic=np.zeros((4, 4)))
    lam, v0, v1 = critical_vectors(L0, 1j)
    crit = CriticalData(0.0, 0.0, float(lam.imag), 0.0, v0, v1)
    with pytest.raises(NonresonanceError, match="nonresonance"):
        gl_coefficients(m, crit)


def test_gauge_covariance(duffing30, critical, coeffs):
    theta = 0.83
    g = np.exp(1j * theta)
    rotated = CriticalData(critical.p_c, critical.phi0, critical.omega0, critical.kappa1,
                           critical.v0 * g, critical.v1 * g, critical.tangencies)
    c2 = gl_coefficients(duffing30, rotated)
    assert abs(c2.kappa2 - coeffs.kappa2) < 1e-12
    assert abs(c2.kappa3 - coeffs.kappa3) < 1e-12
    assert abs(c2.zeta - coeffs.zeta) < 1e-9


def test_reconstruct_zero(coeffs):
    y = reconstruct(coeffs, GLField(np.zeros(64)), 1 / 30, 3.0)
    assert y.shape == (60,) and np.all(y == 0)


def test_reconstruct_constant_pattern(coeffs):
    from dataclasses import replace
    c0 = replace(coeffs, kappa1=0.0)
    c, eps, N = 0.7 - 0.2j, 1 / 30, 30
    y = reconstruct(c0, GLField(np.full(64, c)), eps, 0.0).reshape(N, 2)
    j = np.arange(N)[:, None]
    e = np.exp(1j * coeffs.phi0 * j)
    expect = 2 * (eps * e * coeffs.v0 * c + eps**3 * e**3 * coeffs.v2 * c**3).real
    np.testing.assert_allclose(y, expect, atol=1e-14)


def test_reconstruct_leading_amplitude(coeffs):
    eps, c = 1 / 200, 0.9
    t = np.linspace(0, 20, 400)
    peak = max(np.abs(reconstruct(coeffs, GLField(np.full(64, c)), eps, s)[0::2]).max() for s in t)
    assert abs(peak - 2 * eps * c * abs(coeffs.v0[0])) < 10 * eps**3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1, exclude_max=True))
def test_trig_interpolation_exact_on_band_limited(seed, x):
    rng = np.random.default_rng(seed)
    M = 32
    q = np.arange(-7, 8)
    a = rng.normal(size=q.size) + 1j * rng.normal(size=q.size)
    f = lambda s: (a * np.exp(2j * np.pi * np.multiply.outer(s, q))).sum(-1)
    vals = f(np.arange(M) / M)
    assert abs(trig_interpolate(vals, x) - f(np.array(x))) < 1e-12


def test_trig_interpolation_nyquist_real():
    M = 8
    vals = np.cos(np.pi * M * np.arange(M) / M)
    xi = np.linspace(0, 1, 17)
    np.testing.assert_allclose(trig_interpolate(vals, xi), np.cos(np.pi * M * xi), atol=1e-13)
