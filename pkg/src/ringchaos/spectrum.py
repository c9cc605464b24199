"""Linear stability of the ring's origin: mode spectrum and its continuum limit.

The linearisation at the origin is block circulant, so it splits into ``N``
``n x n`` problems, one per Fourier mode ``phi_j = 2 pi j / N``. Replacing
``phi_j`` with a continuous ``phi`` gives closed curves ``lambda(phi)`` that
the finite-ring eigenvalues fill densely as ``N`` grows. Destabilisation of
a large ring happens where one of these curves touches the imaginary axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .model import RingModel, ring_jacobian

TWO_PI = 2.0 * math.pi
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class SpectrumError(RuntimeError):
    pass


class CriticalPointError(ValueError):
    pass


def inner(u, w) -> complex:
    """``<u, w> = sum_i conj(w_i) u_i``; linear in ``u``, conjugate-linear in ``w``."""
    return complex(np.vdot(w, u))


def symbol_matrix(model: RingModel, p: float, phi) -> np.ndarray:
    """``sum_m exp(i m phi) M_m(p)``; ``phi`` may be an array, giving shape ``(..., n, n)``."""
    phase = np.exp(1j * np.multiply.outer(np.asarray(phi, dtype=float), model.offsets))
    return np.tensordot(phase, model.matrices(p), axes=(-1, 0))


def eigvals_2x2(S: np.ndarray) -> np.ndarray:
    """Closed-form eigenvalues of (stacks of) 2x2 matrices, sorted by imaginary part."""
    tr = S[..., 0, 0] + S[..., 1, 1]
    det = S[..., 0, 0] * S[..., 1, 1] - S[..., 0, 1] * S[..., 1, 0]
    disc = np.sqrt(tr * tr / 4 - det + 0j)
    lam = np.stack([tr / 2 - disc, tr / 2 + disc], axis=-1)
    order = np.argsort(lam.imag, axis=-1)
    return np.take_along_axis(lam, order, axis=-1)


def _eigvals(S: np.ndarray, phis) -> np.ndarray:
    try:
        return np.linalg.eigvals(S)
    except np.linalg.LinAlgError:
        for phi, mat in zip(np.atleast_1d(phis), S.reshape(-1, *S.shape[-2:])):
            try:
                np.linalg.eigvals(mat)
            except np.linalg.LinAlgError:
                raise SpectrumError(f"eigensolver did not converge at phi={phi:.12g}") from None
        raise


@dataclass
class SpectrumCurve:
    """Sampled continuum spectrum; ``branches[i, b]`` is branch ``b`` at ``phi[i]``."""

    phi: np.ndarray
    branches: np.ndarray
    p: float

    def max_real(self) -> float:
        return float(self.branches.real.max())

    def resolution(self) -> float:
        """Largest distance between consecutive samples on any branch (wrapping around)."""
        closed = np.concatenate([self.branches, self.branches[:1]])
        return float(np.abs(np.diff(closed, axis=0)).max())

    def distance(self, points) -> np.ndarray:
        """Distance from each point to the nearest sample of the curve."""
        pts = np.asarray(points).ravel()
        return np.abs(pts[:, None] - self.branches.ravel()[None, :]).min(axis=1)

    def det_residuals(self, model: RingModel) -> np.ndarray:
        S = symbol_matrix(model, self.p, self.phi)
        eye = np.eye(model.n)
        res = np.empty(self.branches.shape)
        for b in range(self.branches.shape[1]):
            lam = self.branches[:, b]
            res[:, b] = np.abs(np.linalg.det(lam[:, None, None] * eye - S)) / (1 + np.abs(lam)) ** model.n
        return res

    def rows(self):
        for i, phi in enumerate(self.phi):
            for b, lam in enumerate(self.branches[i]):
                yield phi, b, lam.real, lam.imag


def _match(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    _, cols = linear_sum_assignment(np.abs(prev[:, None] - cur[None, :]))
    return cur[cols]


def _ambiguous(prev: np.ndarray, cur: np.ndarray) -> bool:
    if prev.size < 2:
        return False
    step = np.abs(_match(prev, cur) - prev).max()
    gaps = np.abs(cur[:, None] - cur[None, :])[np.triu_indices(cur.size, 1)]
    return bool(gaps.min() < 2.0 * step)


def _thread(model, p, phi_a, prev, phi_b, cur, depth=0):
    """Match eigenvalues at ``phi_b`` to branch values at ``phi_a``, refining 4x near degeneracies."""
    if depth >= 3 or not _ambiguous(prev, cur):
        return _match(prev, cur)
    sub = np.linspace(phi_a, phi_b, 5)
    vals = _eigvals(symbol_matrix(model, p, sub[1:-1]), sub[1:-1])
    last, last_phi = prev, phi_a
    for phi, lam in zip(sub[1:], list(vals) + [cur]):
        last = _thread(model, p, last_phi, last, phi, lam, depth + 1)
        last_phi = phi
    return last


def continuous_spectrum(model: RingModel, p: float, num_phi: int = 256) -> SpectrumCurve:
    if num_phi < 16:
        raise ValueError("num_phi must be at least 16")
    phi = TWO_PI * np.arange(num_phi) / num_phi
    raw = _eigvals(symbol_matrix(model, p, phi), phi)
    branches = np.empty_like(raw)
    branches[0] = raw[0][np.lexsort((raw[0].real, raw[0].imag))]
    for i in range(1, num_phi):
        branches[i] = _thread(model, p, phi[i - 1], branches[i - 1], phi[i], raw[i])
    return SpectrumCurve(phi=phi, branches=branches, p=p)


def discrete_spectrum(model: RingModel, p: float) -> np.ndarray:
    """All ``N n`` eigenvalues of the origin linearisation, via the modes ``2 pi j / N``."""
    phi = TWO_PI * np.arange(1, model.N + 1) / model.N
    return _eigvals(symbol_matrix(model, p, phi), phi).ravel()


def dense_origin_spectrum(model: RingModel, p: float) -> np.ndarray:
    J = ring_jacobian(model, np.zeros(model.dim), p).to_dense()
    return np.linalg.eigvals(J)


def pairing_error(a, b) -> float:
    """Largest distance under the optimal one-to-one pairing of two eigenvalue sets."""
    a, b = np.ravel(a), np.ravel(b)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


# --- critical point -----------------------------------------------------------

def top_real(model: RingModel, p: float, phi) -> np.ndarray:
    """Largest real part among the ``n`` eigenvalues at each ``phi``."""
    S = symbol_matrix(model, p, phi)
    return _eigvals(S, phi).real.max(axis=-1)


def _golden_max(f, a: float, b: float, tol: float = 1e-10) -> tuple[float, float]:
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, float(f(x))


def _local_maxima(model, p, num_phi):
    phi = TWO_PI * np.arange(num_phi) / num_phi
    g = top_real(model, p, phi)
    peaks = np.flatnonzero((g >= np.roll(g, 1)) & (g >= np.roll(g, -1)))
    h = TWO_PI / num_phi
    f = lambda x: float(top_real(model, p, x))
    out = []
    for i in peaks:
        x, val = _golden_max(f, phi[i] - h, phi[i] + h)
        out.append((x % TWO_PI, val))
    return out


def max_growth(model: RingModel, p: float, num_phi: int = 512) -> tuple[float, float]:
    """``(max_phi Re lambda, argmax phi)`` over the continuum spectrum."""
    phi, val = max(_local_maxima(model, p, num_phi), key=lambda t: t[1])
    return val, phi


def _canonical_phi(phi: float) -> float:
    """Representative of the conjugate pair ``{phi, 2 pi - phi}`` in ``[0, pi]``."""
    phi = phi % TWO_PI
    return TWO_PI - phi if phi > math.pi else phi


@dataclass
class CouplingMoments:
    L0: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    LK: np.ndarray


def coupling_moments(model: RingModel, phi0: float, p: float = 0.0) -> CouplingMoments:
    """Moments ``sum_m m^k exp(i m phi0) M_m(p)`` for k = 0, 1, 2 and ``sum_m exp(i m phi0) K_m``."""
    m = model.offsets.astype(float)
    w = np.exp(1j * m * phi0)
    M = model.matrices(p)
    return CouplingMoments(
        L0=np.tensordot(w, M, axes=1),
        L1=np.tensordot(m * w, M, axes=1),
        L2=np.tensordot(m * m * w, M, axes=1),
        LK=np.tensordot(w, model.K, axes=1),
    )


@dataclass
class CriticalData:
    p_c: float
    phi0: float
    omega0: float
    kappa1: float
    v0: np.ndarray
    v1: np.ndarray
    tangencies: list = field(default_factory=list)

    def to_json(self) -> dict:
        pairs = lambda v: [[float(z.real), float(z.imag)] for z in v]
        return {"p_c": self.p_c, "phi0": self.phi0, "omega0": self.omega0, "kappa1": self.kappa1,
                "v0": pairs(self.v0), "v1": pairs(self.v1)}


def critical_vectors(L0: np.ndarray, omega_hint: complex | None = None):
    """Eigenvector of ``L0`` for its rightmost eigenvalue and the matching adjoint vector.

    Normalised so that ``|v0| = 1`` with its largest entry real positive and
    ``<v0, v1> = 1``.
    """
    lam, vecs = np.linalg.eig(L0)
    i = int(np.argmax(lam.real)) if omega_hint is None else int(np.argmin(np.abs(lam - omega_hint)))
    others = np.delete(lam, i)
    if others.size and np.min(np.abs(others - lam[i])) < 1e-6:
        raise CriticalPointError("regular point assumption violated: critical eigenvalue is not simple")
    v0 = vecs[:, i] / np.linalg.norm(vecs[:, i])
    big = v0[np.argmax(np.abs(v0))]
    v0 = v0 * (abs(big) / big)
    lam_adj, vecs_adj = np.linalg.eig(L0.conj().T)
    j = int(np.argmin(np.abs(lam_adj - np.conj(lam[i]))))
    v1 = vecs_adj[:, j]
    v1 = v1 / np.conj(inner(v0, v1))
    return lam[i], v0, v1


def find_critical(model: RingModel, p_range, *, num_phi: int = 512, select: int | None = None) -> CriticalData:
    """Locate the parameter where the continuum spectrum first touches the imaginary axis.

    Conjugate tangencies ``phi`` and ``2 pi - phi`` count as one and are
    reported with ``phi0`` in ``[0, pi]``. When several distinct tangencies
    occur at once, ``select`` picks one (by index into ``tangencies``).
    """
    lo, hi = map(float, p_range)
    g = lambda p: max_growth(model, p, num_phi)[0]
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo < 0.0 < g_hi):
        raise CriticalPointError(
            f"p_range does not bracket the instability: growth {g_lo:.3g} at {lo}, {g_hi:.3g} at {hi}")
    p_c = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    peaks = [(phi, val) for phi, val in _local_maxima(model, p_c, num_phi) if val > -1e-6]
    tangencies: list[float] = []
    for phi, _ in sorted(peaks, key=lambda t: -t[1]):
        rep = _canonical_phi(phi)
        if all(abs(rep - t) > 1e-6 for t in tangencies):
            tangencies.append(rep)
    if select is None:
        if len(tangencies) > 1:
            raise CriticalPointError(f"several tangency points {tangencies}; pass select=")
        select = 0
    phi0 = tangencies[select]
    growth = float(top_real(model, p_c, phi0))
    if abs(growth) > 1e-10:
        raise CriticalPointError(f"critical growth rate {growth:.3g} not resolved to 1e-10")
    mom = coupling_moments(model, phi0, p_c)
    lam, v0, v1 = critical_vectors(mom.L0)
    kappa1 = inner(mom.L1 @ v0, v1)
    if abs(kappa1.imag) > 1e-6:
        raise CriticalPointError(f"tangency not satisfied: Im kappa1 = {kappa1.imag:.3g}")
    return CriticalData(p_c=float(p_c), phi0=float(phi0), omega0=float(lam.imag), kappa1=float(kappa1.real),
                        v0=v0, v1=v1, tangencies=tangencies)


def branch_derivative(model: RingModel, p: float, phi: float, lam0: complex, step: float = 1e-5) -> complex:
    """Central difference of the eigenvalue branch through ``lam0`` at ``phi``."""
    vals = []
    for x in (phi + step, phi - step):
        ev = np.linalg.eigvals(symbol_matrix(model, p, x))
        vals.append(ev[np.argmin(np.abs(ev - lam0))])
    return (vals[0] - vals[1]) / (2 * step)


def lemma1_check(model: RingModel, critical: CriticalData, step: float = 1e-5) -> float:
    """``|<L1 v0, v1> - (1/i) dlambda/dphi|`` at the critical point."""
    mom = coupling_moments(model, critical.phi0, critical.p_c)
    projected = inner(mom.L1 @ critical.v0, critical.v1)
    dlam = branch_derivative(model, critical.p_c, critical.phi0, 1j * critical.omega0, step)
    return float(abs(projected - dlam / 1j))
