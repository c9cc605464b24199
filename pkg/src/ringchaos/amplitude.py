"""Ginzburg-Landau coefficients of the ring near its destabilisation point.

Close to the critical parameter the ring state is approximated by

    y_j(t) = eps e^{i(w0 t + phi0 j)} v0 A + eps^3 e^{3i(w0 t + phi0 j)} v2 A^3 + c.c.

with ``eps = 1/N`` and ``A(T1, x1, T2) = u(kappa1 T1 + x1, T2)``, where ``u``
solves ``u_T2 = r kappa2 u + (kappa3/2) u_xixi + zeta |u|^2 u`` on the
periodic unit interval.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import RingModel
from .spectrum import CriticalData, coupling_moments, inner, symbol_matrix

PROBE_RADII = (1e-2, 2e-2)
PROBE_PHASES = 8


class NotCubicError(ValueError):
    pass


class NonresonanceError(ValueError):
    pass


@dataclass
class AmplitudeCoefficients:
    kappa1: float
    kappa2: complex
    kappa3: complex
    zeta: complex
    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    omega0: float
    phi0: float
    h1_v0: np.ndarray
    h2_v0: np.ndarray
    p_c: float = 0.0
    # -lambda''(phi0) from the dispersion curve; differs from kappa3 when the
    # eigenvector varies with phi
    kappa3_dispersion: complex | None = None

    def with_dispersion_kappa3(self) -> "AmplitudeCoefficients":
        if self.kappa3_dispersion is None:
            raise ValueError("dispersion curvature was not computed")
        return replace(self, kappa3=self.kappa3_dispersion)

    def to_json(self) -> dict:
        c = lambda z: [float(np.real(z)), float(np.imag(z))]
        out = {
            "kappa1": self.kappa1,
            "kappa2": c(self.kappa2),
            "kappa3": c(self.kappa3),
            "zeta": c(self.zeta),
            "v2": [c(z) for z in self.v2],
            "omega0": self.omega0,
            "phi0": self.phi0,
            "p_c": self.p_c,
        }
        if self.kappa3_dispersion is not None:
            out["kappa3_dispersion"] = c(self.kappa3_dispersion)
        return out


def _probe_windows(model: RingModel, v0, phi0, rho):
    psi = 2 * np.pi * np.arange(PROBE_PHASES) / PROBE_PHASES
    alpha = rho * np.exp(1j * psi)
    node = np.exp(1j * model.offsets * phi0)[:, None] * np.asarray(v0)[None, :]
    return 2.0 * np.real(alpha[:, None, None] * node[None, :, :]), psi


def probe_cubic(model: RingModel, v0, phi0: float, p: float = 0.0):
    """First- and third-harmonic cubic coefficients ``(h1(v0), h2(v0))``.

    ``h`` is evaluated on windows ``y_m = alpha e^{i m phi0} v0 + c.c.`` with
    ``alpha = rho e^{i psi}``. The ``e^{i psi}`` Fourier coefficient is
    ``rho^3 h1`` (the ``|A|^2 A`` term), the ``e^{3 i psi}`` coefficient is
    ``rho^3 h2``. Two radii are combined by Richardson extrapolation.
    """
    if model.nonlinearity is None:
        z = np.zeros(model.n, dtype=complex)
        return z, z.copy()
    h1s, h2s = [], []
    for rho in PROBE_RADII:
        W, psi = _probe_windows(model, v0, phi0, rho)
        H = np.asarray(model.nonlinearity(W, p), dtype=float)
        coeff = lambda k: np.mean(H * np.exp(-1j * k * psi)[:, None], axis=0)
        even = max(np.abs(coeff(0)).max(), np.abs(coeff(2)).max()) / rho**2
        if even > 1e-8:
            raise NotCubicError(f"nonlinearity not cubic at origin: even harmonics {even:.3g}")
        h1s.append(coeff(1) / rho**3)
        h2s.append(coeff(3) / rho**3)
    out = []
    for a, b in (h1s, h2s):
        extrap = (4.0 * a - b) / 3.0
        scale = np.linalg.norm(extrap)
        if scale > 0 and np.linalg.norm(a - b) > 1e-3 * scale:
            raise NotCubicError("nonlinearity not cubic at origin: probe radii disagree")
        out.append(extrap)
    return out[0], out[1]


def resonance_matrix(model: RingModel, critical: CriticalData) -> np.ndarray:
    S3 = symbol_matrix(model, critical.p_c, 3.0 * critical.phi0)
    return 3j * critical.omega0 * np.eye(model.n) - S3


def dispersion_curvature(model: RingModel, critical: CriticalData, step: float = 1e-3) -> complex:
    """Second derivative of the critical branch ``lambda(phi)`` at ``phi0``."""
    lam0 = 1j * critical.omega0
    vals = []
    for x in (critical.phi0 - step, critical.phi0, critical.phi0 + step):
        ev = np.linalg.eigvals(symbol_matrix(model, critical.p_c, x))
        vals.append(ev[np.argmin(np.abs(ev - lam0))])
    return complex((vals[0] - 2 * vals[1] + vals[2]) / step**2)


def gl_coefficients(model: RingModel, critical: CriticalData) -> AmplitudeCoefficients:
    mom = coupling_moments(model, critical.phi0, critical.p_c)
    v0, v1 = critical.v0, critical.v1
    res = resonance_matrix(model, critical)
    smin = np.linalg.svd(res, compute_uv=False).min()
    if smin <= 1e-6:
        raise NonresonanceError(
            f"nonresonance condition violated: smallest singular value {smin:.3g} at 3 i omega0")
    h1, h2 = probe_cubic(model, v0, critical.phi0, critical.p_c)
    return AmplitudeCoefficients(
        kappa1=critical.kappa1,
        kappa2=inner(mom.LK @ v0, v1),
        kappa3=inner(mom.L2 @ v0, v1),
        zeta=inner(h1, v1),
        v0=v0, v1=v1,
        v2=np.linalg.solve(res, h2),
        omega0=critical.omega0, phi0=critical.phi0,
        h1_v0=h1, h2_v0=h2,
        p_c=critical.p_c,
        kappa3_dispersion=-dispersion_curvature(model, critical),
    )


def trig_interpolate(values: np.ndarray, xi) -> np.ndarray:
    """Trigonometric interpolant of samples at ``i/M`` on the unit circle, evaluated at ``xi``."""
    M = values.size
    c = np.fft.fft(values) / M
    q = np.fft.fftfreq(M, 1.0 / M)
    xi = np.asarray(xi, dtype=float)
    phase = np.exp(2j * np.pi * np.multiply.outer(xi, q))
    out = phase @ c
    if M % 2 == 0:
        # split the Nyquist coefficient evenly between +M/2 and -M/2
        nyq = M // 2
        out = out + c[nyq] * (np.cos(np.pi * M * xi) - phase[..., nyq])
    return out


def reconstruct(coeffs: AmplitudeCoefficients, u_field, epsilon: float, t: float, N: int | None = None) -> np.ndarray:
    """Oscillator state ``y_j(t)`` of the ring from a GL field sample."""
    values = np.asarray(getattr(u_field, "values", u_field), dtype=complex)
    if N is None:
        N = int(round(1.0 / epsilon))
    j = np.arange(N)
    xi = (coeffs.kappa1 * epsilon * t + epsilon * j) % 1.0
    A = trig_interpolate(values, xi)
    phase = np.exp(1j * (coeffs.omega0 * t + coeffs.phi0 * j))
    y = (epsilon * (phase * A)[:, None] * coeffs.v0[None, :]
         + epsilon**3 * (phase**3 * A**3)[:, None] * coeffs.v2[None, :])
    return (2.0 * y.real).ravel()
