"""Direct integration of the ring, Lyapunov spectra and Poincare-section diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _kernels
from .model import RingModel, ring_jacobian, ring_vector_field


class IntegrationError(RuntimeError):
    def __init__(self, time: float, message: str = "non-finite state"):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class LyapunovError(RuntimeError):
    pass


def _steps(duration: float, dt: float) -> int:
    n = int(round(duration / dt))
    if n < 0 or abs(n * dt - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of dt={dt}")
    return n


def _compiled_terms(model: RingModel, p: float):
    return _kernels.sparse_terms(model.matrices(p), model.cubic)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    model: RingModel | None = None
    p: float = 0.0
    dt: float = 0.0
    method: str = "rk4"
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def node(self, j: int) -> np.ndarray:
        n = self.model.n
        return self.states[:, j * n:(j + 1) * n]

    def derivatives(self, idx) -> np.ndarray:
        if self.model is not None:
            return np.array([ring_vector_field(self.model, self.states[i], self.p) for i in np.atleast_1d(idx)])
        grad = np.gradient(self.states, self.times, axis=0)
        return grad[np.atleast_1d(idx)]

    def to_csv(self, path, stride: int = 1):
        cols = ["t"] + [f"y{i}" for i in range(self.states.shape[1])]
        data = np.column_stack([self.times, self.states])[::stride]
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")


def _rk4_numpy(model, y, p, dt, nsteps, stride, t0):
    f = lambda x: ring_vector_field(model, x, p)
    out = [y.copy()]
    for i in range(1, nsteps + 1):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise IntegrationError(t0 + i * dt)
        if i % stride == 0:
            out.append(y.copy())
    return np.array(out)


def integrate(model: RingModel, y0, p: float, t_end: float, dt: float = 0.01, observer=None, *,
              method: str = "rk4", stride: int = 1, atol: float = 1e-9, rtol: float = 1e-9,
              t0: float = 0.0) -> Trajectory:
    """Integrate the ring from ``y0`` over ``[t0, t0 + t_end]``.

    ``rk4`` is fixed-step classical Runge-Kutta; ``rk45`` is scipy's adaptive
    Dormand-Prince pair sampled on the same output grid. States are stored
    every ``stride`` steps and ``observer(t, y)`` is called on each.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.array(y0, dtype=float)
    if y.shape != (model.dim,):
        raise ValueError(f"y0 must have length N*n = {model.dim}")
    nsteps = _steps(t_end, dt)
    meta = {}
    if method == "rk4":
        if model.has_fast_kernel():
            lin, cub = _compiled_terms(model, p)
            states, ok = _kernels.rk4_record(y, lin, cub, model.n, dt, nsteps, stride)
            if not ok:
                raise IntegrationError(t0 + (len(states) - 1) * stride * dt)
        else:
            states = _rk4_numpy(model, y, p, dt, nsteps, stride, t0)
    elif method == "rk45":
        t_eval = t0 + dt * stride * np.arange(nsteps // stride + 1)
        sol = solve_ivp(lambda t, x: ring_vector_field(model, x, p), (t0, t0 + nsteps * dt), y,
                        method="RK45", t_eval=t_eval, atol=atol, rtol=rtol)
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise IntegrationError(sol.t[-1] if sol.t.size else t0, sol.message)
        states = sol.y.T
        meta.update(nfev=int(sol.nfev))
    else:
        raise ValueError(f"unknown method {method!r}")
    times = t0 + dt * stride * np.arange(len(states))
    if observer is not None:
        for t, s in zip(times, states):
            observer(t, s)
    return Trajectory(times, states, model, p, dt, method, meta)


def advance(model: RingModel, y, p: float, duration: float, dt: float = 0.01) -> np.ndarray:
    """Final state after ``duration`` RK4 time units, without storing the path."""
    y = np.array(y, dtype=float)
    nsteps = _steps(duration, dt)
    if model.has_fast_kernel():
        lin, cub = _compiled_terms(model, p)
        if not _kernels.rk4_advance(y, lin, cub, model.n, dt, nsteps):
            raise IntegrationError(duration)
        return y
    return _rk4_numpy(model, y, p, dt, nsteps, max(nsteps, 1), 0.0)[-1]


# --- Lyapunov exponents --------------------------------------------------------

@dataclass
class LyapunovResult:
    """Benettin/QR exponent estimates.

    ``exponents`` is sorted descending. ``history[b]`` holds the running
    estimates (in QR column order) after renormalisation block ``b`` and
    ``log_stretch[b]`` the log stretch factors of that block, whose length in
    time is ``block_times[b]``.
    """

    exponents: np.ndarray
    num_exponents: int
    history: np.ndarray
    log_stretch: np.ndarray
    block_times: np.ndarray
    transient_time: float
    total_time: float
    renorm_interval: float
    final_state: np.ndarray
    halvings: int = 0

    @property
    def max_exponent(self) -> float:
        return float(self.exponents[0])

    def standard_error(self, tail: float = 0.2, batches: int = 10) -> np.ndarray:
        """Batch-means standard error of each exponent over the last ``tail`` of the run."""
        nb = self.log_stretch.shape[0]
        start = int(math.floor((1 - tail) * nb))
        logs, times = self.log_stretch[start:], self.block_times[start:]
        batches = max(2, min(batches, len(times)))
        parts = np.array_split(np.arange(len(times)), batches)
        means = np.array([logs[ix].sum(axis=0) / times[ix].sum() for ix in parts])
        se = means.std(axis=0, ddof=1) / math.sqrt(batches)
        order = np.argsort(-self.history[-1])
        return se[order]

    def count_positive(self, threshold: float = 1e-3) -> int:
        return int(np.sum(self.exponents > threshold))

    def to_json(self) -> dict:
        return {
            "exponents": self.exponents.tolist(),
            "num_exponents": self.num_exponents,
            "transient_time": self.transient_time,
            "total_time": self.total_time,
            "renorm_interval": self.renorm_interval,
            "halvings": self.halvings,
            "standard_error": self.standard_error().tolist(),
            "convergence_history": self.history.tolist(),
        }


def random_orthonormal(dim: int, k: int, rng) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return np.ascontiguousarray(Q)


def _tangent_rhs(model, p):
    def f(y, V):
        return ring_vector_field(model, y, p), ring_jacobian(model, y, p).matvec(V)
    return f


def _numpy_blocks(model, p, y, V, dt, steps, nblocks, logs):
    f = _tangent_rhs(model, p)
    for b in range(nblocks):
        y0, V0 = y.copy(), V.copy()
        for _ in range(steps):
            k1 = f(y, V)
            k2 = f(y + 0.5 * dt * k1[0], V + 0.5 * dt * k1[1])
            k3 = f(y + 0.5 * dt * k2[0], V + 0.5 * dt * k2[1])
            k4 = f(y + dt * k3[0], V + dt * k3[1])
            y += dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            V += dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        Q, Rm = np.linalg.qr(V)
        d = np.abs(np.diag(Rm))
        if not (np.all(np.isfinite(y)) and np.all(d > 1e-290)):
            y[:], V[:] = y0, V0
            return b
        V[:] = Q * np.sign(np.diag(Rm))
        logs[b] = np.log(d)
    return nblocks


def lyapunov_spectrum(model: RingModel, p: float, num_exponents: int, y0=None, t_transient: float = 5e3,
                      t_total: float = 5e4, renorm_interval: float = 1.0, dt: float = 0.01,
                      seed: int = 0, max_halvings: int = 4) -> LyapunovResult:
    """Leading ``num_exponents`` Lyapunov exponents by the Benettin/QR method.

    ``t_total`` includes the transient; exponents average over the remaining
    ``t_total - t_transient``.
    """
    if not 1 <= num_exponents <= model.dim:
        raise ValueError(f"num_exponents must lie in [1, {model.dim}]")
    if t_total <= t_transient:
        raise ValueError("t_total must exceed t_transient")
    rng = np.random.default_rng(seed)
    y = rng.normal(scale=0.1, size=model.dim) if y0 is None else np.array(y0, dtype=float)
    if t_transient > 0:
        y = advance(model, y, p, t_transient, dt)
    V = random_orthonormal(model.dim, num_exponents, rng)
    fast = model.has_fast_kernel()
    if fast:
        lin, cub = _compiled_terms(model, p)

    steps = _steps(renorm_interval, dt)
    remaining = t_total - t_transient
    logs, times = [], []
    halvings = 0
    while remaining > 1e-9:
        nblocks = max(1, min(int(round(remaining / (steps * dt))), 2000))
        chunk = np.zeros((nblocks, num_exponents))
        if fast:
            done = _kernels.lyapunov_blocks(y, V, lin, cub, model.n, dt, steps, nblocks, chunk)
        else:
            done = _numpy_blocks(model, p, y, V, dt, steps, nblocks, chunk)
        logs.append(chunk[:done])
        times.append(np.full(done, steps * dt))
        remaining -= done * steps * dt
        if done < nblocks:
            if halvings >= max_halvings or steps < 2:
                raise LyapunovError(f"tangent collapse persists after {halvings} renormalisation halvings")
            halvings += 1
            steps //= 2
    log_stretch = np.concatenate(logs)
    block_times = np.concatenate(times)
    history = np.cumsum(log_stretch, axis=0) / np.cumsum(block_times)[:, None]
    return LyapunovResult(
        exponents=np.sort(history[-1])[::-1].copy(),
        num_exponents=num_exponents,
        history=history,
        log_stretch=log_stretch,
        block_times=block_times,
        transient_time=t_transient,
        total_time=t_total,
        renorm_interval=renorm_interval,
        final_state=y,
        halvings=halvings,
    )


# --- Poincare sections ---------------------------------------------------------

@dataclass(frozen=True)
class SectionSpec:
    node: int = 0
    component: int = 0
    level: float = 0.0
    direction: int = 1  # +1 upward, -1 downward, 0 both


@dataclass
class Crossing:
    time: float
    state: np.ndarray


def _hermite(s, h, y0, y1, f0, f1):
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def poincare_section(trajectory: Trajectory, section: SectionSpec) -> list[Crossing]:
    n = trajectory.model.n if trajectory.model is not None else 1
    col = section.node * n + section.component
    g = trajectory.states[:, col] - section.level
    up = (g[:-1] < 0) & (g[1:] >= 0)
    down = (g[:-1] > 0) & (g[1:] <= 0)
    mask = up if section.direction > 0 else down if section.direction < 0 else up | down
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    F = trajectory.derivatives(np.concatenate([idx, idx + 1])).reshape(2, idx.size, -1)
    out = []
    for i, f0, f1 in zip(idx, F[0], F[1]):
        t0, t1 = trajectory.times[i], trajectory.times[i + 1]
        y0, y1 = trajectory.states[i], trajectory.states[i + 1]
        h = t1 - t0
        fun = lambda s: _hermite(s, h, y0[col], y1[col], f0[col], f1[col]) - section.level
        if fun(0.0) == 0.0:
            s = 0.0
        else:
            s = brentq(fun, 0.0, 1.0, xtol=1e-14)
        out.append(Crossing(t0 + s * h, _hermite(s, h, y0, y1, f0, f1)))
    return out


# --- attractor classification ---------------------------------------------------

@dataclass
class AttractorProtocol:
    t_transient: float = 5e3
    t_sample: float = 2e3
    dt: float = 0.01
    record_stride: int = 4
    section: SectionSpec = SectionSpec()
    equilibrium_tol: float = 1e-6
    cluster_tol: float = 1e-4
    max_period: int = 16
    lyap_time: float = 5e4
    renorm_interval: float = 1.0
    num_exponents: int = 2
    chaos_threshold: float = 1e-3
    neutral_threshold: float = 1e-4

    @classmethod
    def production(cls, **kw) -> "AttractorProtocol":
        return cls(**kw)

    @classmethod
    def ci(cls, **kw) -> "AttractorProtocol":
        base = dict(t_transient=5e2, t_sample=5e2, lyap_time=5e3)
        base.update(kw)
        return cls(**base)

    @classmethod
    def profile(cls, name: str, **kw) -> "AttractorProtocol":
        if name not in ("ci", "production"):
            raise ValueError(f"unknown profile {name!r}")
        return getattr(cls, name)(**kw)


@dataclass
class Classification:
    label: str
    final_state: np.ndarray
    exponents: np.ndarray | None = None
    clusters: int | None = None
    section_dimension: float | None = None
    crossings: int = 0


def cluster_count(points: np.ndarray, tol: float) -> int:
    centers: list[np.ndarray] = []
    for x in points:
        if not any(np.linalg.norm(x - c) < tol for c in centers):
            centers.append(x)
    return len(centers)


def section_dimension(points: np.ndarray) -> float:
    """Scaling exponent of mean nearest-neighbour distance with sample count.

    A set filling a closed curve gives about 1, a surface about 2.
    """
    m = len(points)
    if m < 16:
        return float("nan")
    sizes = [m // 4, m // 2, m]
    dists = []
    for s in sizes:
        P = points[:s]
        D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
        np.fill_diagonal(D, np.inf)
        dists.append(np.mean(D.min(axis=1)))
    slope = np.polyfit(np.log(sizes), np.log(dists), 1)[0]
    return float(-1.0 / slope) if slope < 0 else float("inf")


def classify_attractor(model: RingModel, p: float, protocol: AttractorProtocol, y0=None,
                       seed: int = 0) -> Classification:
    """Label the attractor reached from ``y0`` at parameter ``p``.

    Order of tests: equilibrium (final norm), periodic (few recurring section
    clusters), then the largest Lyapunov exponent decides chaotic versus
    undetermined. Remaining sets are labelled quasiperiodic when the second
    exponent is also neutral and the section points fill a curve.
    """
    rng = np.random.default_rng(seed)
    y = rng.normal(scale=0.1, size=model.dim) if y0 is None else np.array(y0, dtype=float)
    y = advance(model, y, p, protocol.t_transient, protocol.dt)
    if np.linalg.norm(y) < protocol.equilibrium_tol:
        return Classification("equilibrium", y)
    traj = integrate(model, y, p, protocol.t_sample, protocol.dt, stride=protocol.record_stride)
    y = traj.final
    pts = np.array([c.state for c in poincare_section(traj, protocol.section)])
    if len(pts) == 0:
        if np.linalg.norm(ring_vector_field(model, y, p)) < protocol.equilibrium_tol:
            return Classification("equilibrium", y)
        clusters = None
    else:
        clusters = cluster_count(pts, protocol.cluster_tol)
        if clusters <= protocol.max_period and len(pts) >= 2 * clusters:
            return Classification("periodic", y, clusters=clusters, crossings=len(pts))
    lyap = lyapunov_spectrum(model, p, min(protocol.num_exponents, model.dim), y0=y, t_transient=0.0,
                             t_total=protocol.lyap_time, renorm_interval=protocol.renorm_interval,
                             dt=protocol.dt, seed=seed)
    le = lyap.exponents
    dim = section_dimension(pts) if len(pts) else float("nan")
    info = dict(exponents=le, clusters=clusters, section_dimension=dim, crossings=len(pts))
    if le[0] > protocol.chaos_threshold:
        return Classification("chaotic", lyap.final_state, **info)
    if le[0] >= protocol.neutral_threshold:
        return Classification("undetermined", lyap.final_state, **info)
    if le[0] < -protocol.chaos_threshold:
        # a limit cycle always carries a zero exponent, so this is a slowly decaying focus
        return Classification("equilibrium", lyap.final_state, **info)
    curve_like = not np.isfinite(dim) or 0.75 <= dim <= 1.35
    second_neutral = len(le) > 1 and le[1] > -protocol.chaos_threshold
    label = "quasiperiodic" if (curve_like and second_neutral) else "periodic"
    return Classification(label, lyap.final_state, **info)
