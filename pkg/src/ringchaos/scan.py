"""Hopf and chaos-onset scans over the coupling parameter and the 1/N^2 scaling experiment."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from .glsolver import GLBlowUp, GLField, gl_integrate, gl_linear_growth_rates
from .model import RingModel, duffing_family
from .simulate import AttractorProtocol, IntegrationError, LyapunovError, classify_attractor
from .spectrum import dense_origin_spectrum, symbol_matrix

K_TOL = 1e-13
HOPF_GRID = 4001


class ScanError(RuntimeError):
    pass


# --- Hopf point ---------------------------------------------------------------

def duffing_mode_threshold(phi, a: float = 0.1, d: float = 0.3) -> np.ndarray:
    """Closed-form coupling at which mode ``phi`` of the Duffing ring reaches the imaginary axis."""
    phi = np.asarray(phi, dtype=float)
    c, s2 = 1.0 - np.cos(phi), np.sin(phi) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (d**2 * c + np.sqrt(d**4 * c**2 + 4 * a * d**2 * s2)) / (2 * s2)
    return np.where(s2 > 1e-24, k, np.inf)


def _mode_growth(model: RingModel, k, phi) -> np.ndarray:
    S = symbol_matrix(model, 0.0, phi)
    dS = symbol_matrix(model, 1.0, phi) - S
    k = np.atleast_1d(np.asarray(k, dtype=float))
    mats = S[None] + k[:, None, None] * dS[None]
    return np.linalg.eigvals(mats).real.max(axis=-1)


def mode_hopf_points(model: RingModel, k_max: float = 10.0) -> np.ndarray:
    """Smallest destabilising ``k`` for each discrete mode ``phi_j = 2 pi j / N`` (inf if none)."""
    grid = np.concatenate([[0.0], np.geomspace(1e-6, k_max, HOPF_GRID - 1)])
    out = np.full(model.N, np.inf)
    for j in range(model.N):
        phi = 2 * np.pi * j / model.N
        g = _mode_growth(model, grid, phi)
        if g[0] >= 0:
            out[j] = 0.0
            continue
        idx = np.flatnonzero(g >= 0)
        if idx.size == 0:
            continue
        i = idx[0]
        f = lambda k: float(_mode_growth(model, k, phi)[0])
        out[j] = brentq(f, grid[i - 1], grid[i], xtol=K_TOL, rtol=4 * np.finfo(float).eps)
    return out


def find_k_hopf(family, N: int, k_max: float = 10.0, *, cross_check: bool = True) -> float:
    """First Hopf point ``k_H`` of the ring of size ``N``: the minimum over modes of the mode thresholds."""
    model = family(N)
    ks = mode_hopf_points(model, k_max)
    k_H = float(ks.min())
    if not np.isfinite(k_H):
        raise ScanError(f"no Hopf in range k <= {k_max} for N={N}")
    if cross_check and model.dim <= 400:
        delta = 1e-4
        below = dense_origin_spectrum(model, k_H - delta).real.max() if k_H > delta else -1.0
        above = dense_origin_spectrum(model, k_H + delta).real.max()
        if not (below < 0 < above):
            raise ScanError(f"dense Jacobian disagrees with mode-wise k_H={k_H:.10g} for N={N}")
    return k_H


# --- chaos onset --------------------------------------------------------------

@dataclass
class ChaosScan:
    k_Ch: float | None
    bracket: tuple[float, float] | None
    samples: list = field(default_factory=list)
    undetermined: list = field(default_factory=list)
    k_hyper: float | None = None

    @property
    def interval_only(self) -> bool:
        return self.k_Ch is None and self.bracket is not None


def _noise(y, rng, scale=1e-6):
    return y + scale * rng.standard_normal(y.shape)


def _classify(model, k, protocol, y, rng, seed):
    try:
        c = classify_attractor(model, k, protocol, y0=_noise(y, rng), seed=seed)
    except (IntegrationError, LyapunovError) as exc:
        raise ScanError(f"integration failed at k={k:.6g}: {exc}") from exc
    if c.label == "undetermined":
        longer = AttractorProtocol(**{**asdict(protocol), "section": protocol.section,
                                      "lyap_time": 2 * protocol.lyap_time})
        c = classify_attractor(model, k, longer, y0=c.final_state, seed=seed)
    return c


def _positive_count(c, threshold):
    return None if c.exponents is None else int(np.sum(c.exponents > threshold))


def find_k_chaos(family, N: int, k_start: float, protocol: AttractorProtocol | None = None, *,
                 k_step: float = 1e-3, k_tol: float = 1e-4, k_max: float = 1.0, seed: int = 0,
                 y0=None, hyper_span: float = 0.0) -> ChaosScan:
    """Scan ``k`` upward from ``k_start`` by attractor continuation until the dynamics turn chaotic.

    Each new ``k`` starts from the final state at the previous one plus
    ``1e-6`` seeded noise. The first chaotic step is refined by bisection
    against the last non-chaotic one down to ``k_tol``. With ``hyper_span > 0``
    the continuation then goes on past the onset, for at most that distance,
    until a second exponent is positive (``k_hyper``).
    """
    protocol = protocol or AttractorProtocol.production()
    model = family(N)
    rng = np.random.default_rng(seed)
    y = rng.normal(scale=1e-2, size=model.dim) if y0 is None else np.asarray(y0, dtype=float)
    out = ChaosScan(None, None)
    last_ok, last_state = None, y
    n = 0
    while True:
        k = k_start + n * k_step
        if k > k_max + 1e-12:
            if out.undetermined:
                out.bracket = (out.undetermined[0], k_max)
                return out
            raise ScanError(f"no transition found below k_max={k_max} for N={N}")
        c = _classify(model, k, protocol, last_state, rng, seed)
        out.samples.append((k, c.label, None if c.exponents is None else c.exponents.tolist()))
        if c.label == "undetermined":
            out.undetermined.append(k)
        if c.label == "chaotic":
            if (_positive_count(c, protocol.chaos_threshold) or 0) >= 2:
                out.k_hyper = k
            break
        last_ok, last_state = k, c.final_state
        n += 1
    k_first, chaos_state = k, c.final_state
    if hyper_span > 0 and out.k_hyper is None:
        kk = k_first + k_step
        while kk <= min(k_first + hyper_span, k_max) + 1e-12:
            c = _classify(model, kk, protocol, chaos_state, rng, seed)
            out.samples.append((kk, c.label, None if c.exponents is None else c.exponents.tolist()))
            chaos_state = c.final_state
            if (_positive_count(c, protocol.chaos_threshold) or 0) >= 2:
                out.k_hyper = kk
                break
            kk += k_step
    if last_ok is None:
        out.k_Ch, out.bracket = k_first, (k_first, k_first)
        return out
    lo, hi, state = last_ok, k_first, last_state
    while hi - lo > k_tol + 1e-12:
        mid = 0.5 * (lo + hi)
        c = _classify(model, mid, protocol, state, rng, seed)
        out.samples.append((mid, c.label, None if c.exponents is None else c.exponents.tolist()))
        if c.label == "chaotic":
            hi = mid
        else:
            lo, state = mid, c.final_state
    out.k_Ch, out.bracket = hi, (lo, hi)
    return out


def first_positive_crossings(samples, threshold: float = 1e-3, count: int = 2):
    """Smallest sampled ``k`` at which each of the leading ``count`` exponents exceeds ``threshold``."""
    rows = sorted((k, ex) for k, _, ex in samples if ex is not None)
    out = []
    for i in range(count):
        hit = [k for k, ex in rows if len(ex) > i and ex[i] > threshold]
        out.append(hit[0] if hit else None)
    return out


# --- scaling experiment -------------------------------------------------------

@dataclass
class ScanRecord:
    N: int
    k_H: float
    k_Ch: float
    k_Re: float
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def build(cls, N, k_H, k_Ch, **diag) -> "ScanRecord":
        if k_Ch < k_H:
            raise ScanError(f"k_Ch={k_Ch} precedes k_H={k_H} for N={N}")
        return cls(N, k_H, k_Ch, (k_Ch - k_H) * N**2, diag)

    def row(self) -> list:
        return [self.N, self.k_H, self.k_Ch, self.k_Re]


@dataclass(frozen=True)
class DuffingFamily:
    """Picklable Duffing ring family for process pools."""

    a: float = 0.1
    d: float = 0.3

    def __call__(self, N: int) -> RingModel:
        return duffing_family(self.a, self.d)(N)


def _scan_cell(family, N, protocol, k_step, k_tol, k_max, seed, hyper_span):
    try:
        k_H = find_k_hopf(family, N)
        res = find_k_chaos(family, N, k_H + k_step, protocol, k_step=k_step, k_tol=k_tol,
                           k_max=k_max, seed=seed, hyper_span=hyper_span)
        crossings = first_positive_crossings(res.samples, protocol.chaos_threshold)
        diag = dict(method="attractor continuation + bisection", k_step=k_step, k_tol=k_tol,
                    chaos_threshold=protocol.chaos_threshold, bracket=res.bracket,
                    undetermined=res.undetermined, first_positive=crossings, k_hyper=res.k_hyper,
                    samples=res.samples)
        if res.k_Ch is None:
            return ScanRecord(N, k_H, math.nan, math.nan, dict(diag, error="interval only"))
        return ScanRecord.build(N, k_H, res.k_Ch, **diag)
    except Exception as exc:  # recorded per cell, other rows unaffected
        return ScanRecord(N, math.nan, math.nan, math.nan, {"error": f"{type(exc).__name__}: {exc}"})


def scaling_experiment(family, N_list, protocol: AttractorProtocol | None = None, *, k_step: float = 1e-3,
                       k_tol: float = 1e-4, k_max: float = 1.0, seed: int = 0, hyper_span: float = 0.0,
                       workers: int | None = None) -> list[ScanRecord]:
    N_list = list(N_list)
    if N_list != sorted(N_list):
        raise ValueError("N_list must be sorted ascending")
    protocol = protocol or AttractorProtocol.production()
    args = [(family, N, protocol, k_step, k_tol, k_max, seed, hyper_span) for N in N_list]
    if workers == 1 or len(N_list) == 1:
        return [_scan_cell(*a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scan_cell, *zip(*args)))


def scaling_summary(records) -> dict:
    kre = np.array([r.k_Re for r in records], dtype=float)
    good = kre[np.isfinite(kre)]
    if good.size == 0:
        return {"min_kRe": None, "max_kRe": None, "ratio": None}
    lo, hi = float(good.min()), float(good.max())
    return {"min_kRe": lo, "max_kRe": hi, "ratio": hi / lo if lo > 0 else math.inf}


# --- GL transition interval ---------------------------------------------------

@dataclass
class GLProtocol:
    grid: int = 128
    dt: float = 1e-3
    t_transient: float = 20.0
    t_measure: float = 20.0
    renorm: float = 0.5
    separation: float = 1e-8
    r_step: float = 0.5
    threshold: float = 1e-3
    spectral_cutoff: int | None = None
    seed: int = 0


@dataclass
class GLTransition:
    r0: float
    r_chaos: float | None
    delta_r: float | None
    rates: list

    def predicted_width(self, N: int) -> float | None:
        return None if self.delta_r is None else self.delta_r / N**2


def gl_divergence_rate(r: float, coeffs, protocol: GLProtocol, field: GLField | None = None) -> float:
    """Exponential separation rate of two nearby GL fields, renormalised every ``protocol.renorm``."""
    kw = dict(spectral_cutoff=protocol.spectral_cutoff)
    if field is None:
        field = GLField.random(protocol.grid, 1e-3, protocol.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u, _ = gl_integrate(field, r, coeffs, protocol.t_transient, protocol.dt, **kw)
        rng = np.random.default_rng(protocol.seed + 1)
        d = rng.standard_normal(protocol.grid) + 1j * rng.standard_normal(protocol.grid)
        d *= protocol.separation / np.sqrt(np.mean(np.abs(d) ** 2))
        w = GLField(u.values + d, u.time)
        total, elapsed = 0.0, 0.0
        while elapsed < protocol.t_measure - 1e-12:
            u, _ = gl_integrate(u, r, coeffs, protocol.renorm, protocol.dt, **kw)
            w, _ = gl_integrate(w, r, coeffs, protocol.renorm, protocol.dt, **kw)
            diff = w.values - u.values
            sep = np.sqrt(np.mean(np.abs(diff) ** 2))
            total += math.log(sep / protocol.separation)
            elapsed += protocol.renorm
            w = GLField(u.values + diff * (protocol.separation / sep), u.time)
    return total / elapsed


def gl_transition_interval(coeffs, r_range, protocol: GLProtocol | None = None) -> GLTransition:
    """Width ``r_chaos - r0`` between destabilisation of ``u = 0`` and GL spatio-temporal chaos."""
    protocol = protocol or GLProtocol()
    if np.real(coeffs.zeta) >= 0:
        raise ValueError("transition interval needs a supercritical reduction (Re zeta < 0)")
    k2 = np.real(coeffs.kappa2)
    if k2 <= 0:
        raise ValueError("Re kappa2 must be positive for u = 0 to destabilise with increasing r")
    r0 = homogeneous_threshold(coeffs)
    rates = []
    r_lo, r_hi = r_range
    r = max(r_lo, r0 + protocol.r_step)
    while r <= r_hi + 1e-12:
        try:
            lam = gl_divergence_rate(r, coeffs, protocol)
        except GLBlowUp:
            lam = math.inf
        rates.append((r, lam))
        if lam > protocol.threshold:
            return GLTransition(r0, r, r - r0, rates)
        r += protocol.r_step
    return GLTransition(r0, None, None, rates)


def homogeneous_threshold(coeffs, q_max: int = 4, r_max: float = 1e3) -> float:
    """Smallest ``r`` at which some mode ``|q| <= q_max`` of ``u = 0`` grows."""
    growing = lambda r: max(rate.real for _, rate in gl_linear_growth_rates(r, coeffs, q_max)) > 0
    if growing(0.0):
        return 0.0
    if not growing(r_max):
        raise ValueError(f"u = 0 stays stable up to r = {r_max}")
    return brentq(lambda r: max(rate.real for _, rate in gl_linear_growth_rates(r, coeffs, q_max)), 0.0, r_max)

