import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ringchaos.model import DuffingRingParams, RingModel, make_duffing_ring
from ringchaos.simulate import (AttractorProtocol, IntegrationError, SectionSpec, Trajectory,
                                classify_attractor, cluster_count, integrate, lyapunov_spectrum,
                                poincare_section)

D = 0.3
K_H8 = 0.15  # mode phi = pi/2 of the N = 8 Duffing ring


def generic_duffing(N):
    """Same ring through the generic callback path (no compiled kernel)."""
    base = make_duffing_ring(DuffingRingParams(), N)
    h = lambda W, p: np.stack([np.zeros_like(W[..., 1, 0]), -W[..., 1, 0] ** 3], axis=-1)
    return RingModel(n=2, N=N, R=1, M0=base.M0, K=base.K, nonlinearity=h)


def oscillator_ring(N=2, omega=1.0):
    return RingModel.from_matrices({0: [[0.0, 1.0], [-omega**2, 0.0]]}, N=N, R=0)


def test_decoupled_node_decays():
    m = make_duffing_ring(DuffingRingParams(), 2)
    y0 = np.array([1e-2, 0.0, 0.0, 0.0])
    tr = integrate(m, y0, 0.0, 100.0, 0.01)
    assert np.linalg.norm(tr.final) < 1e-6 * np.linalg.norm(y0)


def test_zero_state_stays_zero():
    m = make_duffing_ring(DuffingRingParams(), 5)
    tr = integrate(m, np.zeros(10), 0.4, 10.0)
    assert np.all(tr.states == 0)


def test_times_increasing_and_strided():
    m = make_duffing_ring(DuffingRingParams(), 4)
    tr = integrate(m, np.full(8, 0.1), 0.2, 1.0, 0.01, stride=10)
    assert tr.states.shape == (11, 8)
    assert np.all(np.diff(tr.times) > 0)
    np.testing.assert_allclose(tr.times[-1], 1.0)


@pytest.mark.parametrize("generic", [False, True])
def test_rk4_order(generic):
    m = generic_duffing(3) if generic else make_duffing_ring(DuffingRingParams(), 3)
    y0 = np.array([0.5, 0.0, -0.2, 0.1, 0.3, -0.4])
    finals = [integrate(m, y0, 0.3, 2.0, dt).final for dt in (0.1, 0.05, 0.025)]
    order = np.log2(np.abs(finals[0] - finals[1]).max() / np.abs(finals[1] - finals[2]).max())
    assert order >= 3.9


def test_compiled_matches_generic(rng):
    y0 = rng.normal(size=10)
    a = integrate(make_duffing_ring(DuffingRingParams(), 5), y0, 0.4, 5.0, 0.01).final
    b = integrate(generic_duffing(5), y0, 0.4, 5.0, 0.01).final
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_adaptive_agrees_with_rk4():
    m = make_duffing_ring(DuffingRingParams(), 3)
    y0 = np.array([0.5, 0.0, 0.1, 0.0, 0.0, 0.2])
    a = integrate(m, y0, 0.3, 10.0).final
    b = integrate(m, y0, 0.3, 10.0, method="rk45").final
    assert np.abs(a - b).max() < 1e-6


def test_non_finite_aborts_with_time():
    base = make_duffing_ring(DuffingRingParams(), 2)
    m = RingModel(n=2, N=2, R=1, M0=base.M0, K=base.K, cubic=np.array([[0.0, 0.0], [1.0, 0.0]]))
    with pytest.raises(IntegrationError) as err:
        integrate(m, np.array([3.0, 0.0, 0.0, 0.0]), 0.0, 50.0, 0.01)
    assert 0 < err.value.time < 50


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shift_equivariant_dynamics(seed):
    N = 5
    m = make_duffing_ring(DuffingRingParams(), N)
    y0 = np.random.default_rng(seed).normal(scale=0.3, size=2 * N)
    rot = lambda v: np.roll(v.reshape(N, 2), 1, axis=0).ravel()
    a = integrate(m, y0, 0.3, 5.0).final
    b = integrate(m, rot(y0), 0.3, 5.0).final
    np.testing.assert_array_equal(rot(a), b)


def test_lyapunov_decoupled():
    m = make_duffing_ring(DuffingRingParams(), 2)
    res = lyapunov_spectrum(m, 0.0, 2, t_transient=100.0, t_total=1100.0)
    np.testing.assert_allclose(res.exponents, -0.15, atol=0.005)
    assert np.all(np.diff(res.exponents) <= 0)


def test_lyapunov_generic_path_matches():
    kw = dict(t_transient=5.0, t_total=45.0)
    generic = lyapunov_spectrum(generic_duffing(2), 0.0, 2, **kw).exponents
    compiled = lyapunov_spectrum(make_duffing_ring(DuffingRingParams(), 2), 0.0, 2, **kw).exponents
    np.testing.assert_allclose(generic, compiled, atol=1e-10)


@pytest.fixture(scope="module")
def limit_cycle():
    m = make_duffing_ring(DuffingRingParams(), 8)
    return m, lyapunov_spectrum(m, K_H8 + 0.01, 2, t_transient=3000.0, t_total=8000.0, seed=1)


def test_limit_cycle_neutral_exponent(limit_cycle):
    _, res = limit_cycle
    assert abs(res.exponents[0]) < 0.005
    assert res.exponents[1] < 0
    se = res.standard_error()
    assert abs(res.exponents[0]) < 3 * se[0] + 1e-4


def test_renorm_interval_invariance(limit_cycle):
    m, res = limit_cycle
    half = lyapunov_spectrum(m, K_H8 + 0.01, 2, t_transient=3000.0, t_total=8000.0, seed=1,
                             renorm_interval=0.5)
    tol = 2 * np.maximum(res.standard_error(), half.standard_error()) + 1e-4
    assert np.all(np.abs(res.exponents - half.exponents) < tol)


def test_sum_rule():
    N = 3
    m = make_duffing_ring(DuffingRingParams(), N)
    res = lyapunov_spectrum(m, 0.5, 2 * N, t_transient=100.0, t_total=1100.0)
    assert abs(res.exponents.sum() + N * D) < 0.01 * N * D


def test_convergence_history_shape():
    m = make_duffing_ring(DuffingRingParams(), 2)
    res = lyapunov_spectrum(m, 0.0, 2, t_transient=10.0, t_total=60.0, renorm_interval=1.0)
    assert res.history.shape == (50, 2)
    assert len(res.to_json()["convergence_history"]) == 50


def test_lyapunov_rejects_bad_arguments():
    m = make_duffing_ring(DuffingRingParams(), 2)
    with pytest.raises(ValueError):
        lyapunov_spectrum(m, 0.0, 5)
    with pytest.raises(ValueError):
        lyapunov_spectrum(m, 0.0, 2, t_transient=10.0, t_total=5.0)


def test_poincare_harmonic_period():
    m = oscillator_ring(omega=1.3)
    tr = integrate(m, np.array([1.0, 0.0, 0.5, 0.0]), 0.0, 60.0, 0.01)
    cr = poincare_section(tr, SectionSpec(node=0, component=0, level=0.0, direction=1))
    times = np.array([c.time for c in cr])
    assert len(times) >= 10
    np.testing.assert_allclose(np.diff(times), 2 * np.pi / 1.3, atol=1e-6)
    assert all(abs(c.state[0]) < 1e-9 and c.state[1] > 0 for c in cr)


def test_poincare_constant_trajectory():
    tr = Trajectory(np.arange(10.0), np.ones((10, 4)))
    assert poincare_section(tr, SectionSpec()) == []


def test_period_one_cluster():
    m = make_duffing_ring(DuffingRingParams(), 8)
    y = lyapunov_spectrum(m, K_H8 + 0.01, 1, t_transient=4000.0, t_total=4001.0, seed=2).final_state
    tr = integrate(m, y, K_H8 + 0.01, 300.0, 0.01)
    pts = np.array([c.state for c in poincare_section(tr, SectionSpec())])
    assert len(pts) > 5
    assert cluster_count(pts, 1e-6) == 1


def test_classify_equilibrium_and_periodic():
    m = make_duffing_ring(DuffingRingParams(), 8)
    proto = AttractorProtocol.ci()
    assert classify_attractor(m, 0.1, proto).label == "equilibrium"
    assert classify_attractor(m, K_H8 + 0.01, proto, seed=3).label == "periodic"


def test_profiles():
    assert AttractorProtocol.ci().lyap_time * 10 == AttractorProtocol.production().lyap_time
    with pytest.raises(ValueError):
        AttractorProtocol.profile("huge")
