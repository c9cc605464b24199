"""Ring-coupled oscillator model and the Duffing ring reference instance.

A ring of ``N`` identical ``n``-dimensional nodes evolves as

    dy_j/dt = sum_{m=-R..R} (M_m(0) + p K_m) y_{j+m} + h(y_{j-R}, ..., y_{j+R}; p)

with all node indices taken modulo ``N``. Coupling matrices are stored as
stacked arrays of shape ``(2R+1, n, n)``; slot ``m + R`` holds offset ``m``.

Nonlinearities are callbacks on neighbour windows. They must broadcast over
leading axes: a window array of shape ``(..., 2R+1, n)`` maps to ``(..., n)``.
A single window of shape ``(2R+1, n)`` is just the unbatched case.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

Nonlinearity = Callable[[np.ndarray, float], np.ndarray]

FD_STEP = 1e-6


class ModelError(ValueError):
    """Raised for malformed models or model files."""


def _stack(matrices: Mapping[int, np.ndarray], R: int, n: int) -> np.ndarray:
    out = np.zeros((2 * R + 1, n, n))
    for m, mat in matrices.items():
        m = int(m)
        if abs(m) > R:
            raise ModelError(f"offset {m} outside coupling range R={R}")
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (n, n):
            raise ModelError(f"matrix for offset {m} has shape {mat.shape}, expected {(n, n)}")
        out[m + R] = mat
    return out


def local_cubic(coeffs: np.ndarray, R: int) -> Nonlinearity:
    """Nonlinearity ``h[t] = sum_s coeffs[t, s] * y_j[s]**3`` acting on the centre node."""
    coeffs = np.asarray(coeffs, dtype=float)

    def h(window, p):
        y = window[..., R, :]
        return (y**3) @ coeffs.T

    return h


def local_cubic_jacobian(coeffs: np.ndarray, R: int):
    coeffs = np.asarray(coeffs, dtype=float)
    n = coeffs.shape[0]

    def dh(window, p):
        y = window[..., R, :]
        out = np.zeros(window.shape[:-2] + (n, 2 * R + 1, n))
        out[..., :, R, :] = 3.0 * coeffs * (y**2)[..., None, :]
        return out

    return dh


@dataclass(frozen=True, eq=False)
class RingModel:
    """Ring of ``N`` identical nodes with coupling range ``R``.

    ``M0`` and ``K`` have shape ``(2R+1, n, n)``. ``cubic`` is set when the
    nonlinearity is a local cubic polynomial; it enables the compiled
    integration kernels and an analytic Jacobian.
    """

    n: int
    N: int
    R: int
    M0: np.ndarray
    K: np.ndarray
    nonlinearity: Nonlinearity | None = None
    nonlinearity_jacobian: Callable | None = None
    parameter_label: str = "p"
    cubic: np.ndarray | None = None
    name: str = "ring"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.N < 1 or self.R < 0:
            raise ModelError(f"need n >= 1, N >= 1, R >= 0; got n={self.n}, N={self.N}, R={self.R}")
        shape = (2 * self.R + 1, self.n, self.n)
        for label in ("M0", "K"):
            arr = np.asarray(getattr(self, label), dtype=float)
            if arr.shape != shape:
                raise ModelError(f"{label} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, label, arr)
        if self.cubic is not None:
            cubic = np.asarray(self.cubic, dtype=float)
            if cubic.shape != (self.n, self.n):
                raise ModelError(f"cubic coefficients must be {self.n}x{self.n}")
            cubic.setflags(write=False)
            object.__setattr__(self, "cubic", cubic)
            if self.nonlinearity is None:
                object.__setattr__(self, "nonlinearity", local_cubic(cubic, self.R))
                object.__setattr__(self, "nonlinearity_jacobian", local_cubic_jacobian(cubic, self.R))
        if self.nonlinearity is not None:
            self._check_nonlinearity()

    def _check_nonlinearity(self):
        w = np.zeros((2 * self.R + 1, self.n))
        h0 = np.asarray(self.nonlinearity(w, 0.0), dtype=float)
        if h0.shape != (self.n,):
            raise ModelError(f"nonlinearity returned shape {h0.shape}, expected {(self.n,)}")
        if np.any(h0 != 0.0):
            raise ModelError("nonlinearity must vanish at the origin")
        delta = 1e-4
        for idx in range(w.size):
            e = np.zeros(w.size)
            e[idx] = delta
            ratio = np.linalg.norm(self.nonlinearity(e.reshape(w.shape), 0.0)) / delta
            if ratio >= 1e-6:
                raise ModelError("nonlinearity must have zero first derivative at the origin")

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.R, self.R + 1)

    @property
    def dim(self) -> int:
        return self.N * self.n

    def matrices(self, p: float) -> np.ndarray:
        """Coupling matrices ``M_m(p)`` stacked over offsets."""
        return self.M0 + p * self.K

    def with_size(self, N: int) -> "RingModel":
        """Same node dynamics and coupling on a ring of ``N`` nodes."""
        return _replace(self, N=N)

    def shifted(self, p0: float) -> "RingModel":
        """Re-base the parameter so that the new ``p = 0`` is the old ``p0``."""
        return _replace(self, M0=self.M0 + p0 * self.K, meta={**self.meta, "base_shift": p0})

    def has_fast_kernel(self) -> bool:
        return self.cubic is not None

    @classmethod
    def from_matrices(cls, M0: Mapping[int, np.ndarray], K: Mapping[int, np.ndarray] | None = None,
                      *, N: int, nonlinearity=None, **kwargs) -> "RingModel":
        """Build a model from ``{offset: matrix}`` maps; missing offsets are zero."""
        keys = set(int(m) for m in M0) | set(int(m) for m in (K or {}))
        R = max((abs(m) for m in keys), default=0)
        R = max(R, kwargs.pop("R", 0))
        n = np.asarray(next(iter(M0.values()))).shape[0]
        return cls(n=n, N=N, R=R, M0=_stack(M0, R, n), K=_stack(K or {}, R, n),
                   nonlinearity=nonlinearity, **kwargs)

    @classmethod
    def from_parametric(cls, matrix_fn: Callable[[float], Mapping[int, np.ndarray]], *, N: int,
                        nonlinearity=None, **kwargs) -> "RingModel":
        """Build a model from ``p -> {offset: M_m(p)}``; ``K_m`` comes from central differences."""
        base = matrix_fn(0.0)
        plus, minus = matrix_fn(FD_STEP), matrix_fn(-FD_STEP)
        K = {m: (np.asarray(plus[m], float) - np.asarray(minus[m], float)) / (2 * FD_STEP) for m in base}
        return cls.from_matrices(base, K, N=N, nonlinearity=nonlinearity, **kwargs)


def _replace(model: RingModel, **changes) -> RingModel:
    fields = dict(n=model.n, N=model.N, R=model.R, M0=model.M0, K=model.K,
                  nonlinearity=model.nonlinearity, nonlinearity_jacobian=model.nonlinearity_jacobian,
                  parameter_label=model.parameter_label, cubic=model.cubic, name=model.name,
                  meta=dict(model.meta))
    fields.update(changes)
    if fields["cubic"] is not None and "nonlinearity" not in changes:
        fields["nonlinearity"] = None
        fields["nonlinearity_jacobian"] = None
    return RingModel(**fields)


def _check_state(model: RingModel, state) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape != (model.dim,):
        raise ModelError(f"state has shape {state.shape}, expected ({model.dim},) = N*n")
    return state


def windows(model: RingModel, Y: np.ndarray) -> np.ndarray:
    """Neighbour windows of shape ``(N, 2R+1, n)`` from node states ``Y`` of shape ``(N, n)``."""
    idx = (np.arange(model.N)[:, None] + model.offsets[None, :]) % model.N
    return Y[idx]


def ring_vector_field(model: RingModel, state, p: float) -> np.ndarray:
    state = _check_state(model, state)
    W = windows(model, state.reshape(model.N, model.n))
    out = np.einsum("mab,jmb->ja", model.matrices(p), W)
    if model.nonlinearity is not None:
        out = out + model.nonlinearity(W, p)
    return out.ravel()


@dataclass(frozen=True, eq=False)
class BandedJacobian:
    """Block-banded circulant-pattern Jacobian.

    ``blocks[j, m + R]`` is the derivative of node ``j``'s equation with
    respect to node ``j + m``. Storage and mat-vec are O(N R n^2).
    """

    blocks: np.ndarray
    R: int

    @property
    def N(self) -> int:
        return self.blocks.shape[0]

    @property
    def n(self) -> int:
        return self.blocks.shape[2]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """Apply to a vector of length N*n or a matrix of shape (N*n, k)."""
        v = np.asarray(v)
        vec = v.ndim == 1
        V = v.reshape(self.N, self.n, -1)
        idx = (np.arange(self.N)[:, None] + np.arange(-self.R, self.R + 1)[None, :]) % self.N
        out = np.einsum("jmab,jmbk->jak", self.blocks, V[idx])
        out = out.reshape(self.N * self.n, -1)
        return out[:, 0] if vec else out

    def to_dense(self) -> np.ndarray:
        N, n = self.N, self.n
        J = np.zeros((N * n, N * n), dtype=self.blocks.dtype)
        for j in range(N):
            for mi, m in enumerate(range(-self.R, self.R + 1)):
                jj = (j + m) % N
                J[j * n:(j + 1) * n, jj * n:(jj + 1) * n] += self.blocks[j, mi]
        return J


def _nonlinearity_fd(model: RingModel, W: np.ndarray, p: float, step: float) -> np.ndarray:
    """Central differences of ``h`` with respect to each window entry."""
    N, nm, n = W.shape
    out = np.zeros((N, n, nm, n))
    for mi in range(nm):
        for s in range(n):
            Wp = W.copy()
            Wm = W.copy()
            Wp[:, mi, s] += step
            Wm[:, mi, s] -= step
            out[:, :, mi, s] = (model.nonlinearity(Wp, p) - model.nonlinearity(Wm, p)) / (2 * step)
    return out


def ring_jacobian(model: RingModel, state, p: float, *, analytic: bool = True) -> BandedJacobian:
    state = _check_state(model, state)
    blocks = np.broadcast_to(model.matrices(p), (model.N,) + model.M0.shape).copy()
    if model.nonlinearity is not None:
        W = windows(model, state.reshape(model.N, model.n))
        if analytic and model.nonlinearity_jacobian is not None:
            dh = model.nonlinearity_jacobian(W, p)
        else:
            step = FD_STEP * max(1.0, float(np.max(np.abs(state), initial=0.0)))
            dh = _nonlinearity_fd(model, W, p, step)
        blocks += np.transpose(dh, (0, 2, 1, 3))
    return BandedJacobian(blocks, model.R)


@dataclass(frozen=True)
class DuffingRingParams:
    """Parameters of the unidirectionally coupled Duffing ring."""

    a: float = 0.1
    d: float = 0.3
    k: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.d > 0):
            raise ModelError("Duffing ring needs a > 0 and d > 0")
        if self.k < 0:
            raise ModelError("coupling k must be non-negative")


def make_duffing_ring(params: DuffingRingParams, N: int) -> RingModel:
    """Duffing ring with node state (x, z); the parameter ``p`` is the offset ``k - params.k``.

    With the default ``params.k = 0`` the parameter is the coupling strength itself.
    """
    if N < 2:
        raise ModelError("Duffing ring needs N >= 2")
    a, d, k0 = params.a, params.d, params.k
    M0 = {0: [[0.0, 1.0], [-(a + k0), -d]], 1: [[0.0, 0.0], [k0, 0.0]], -1: np.zeros((2, 2))}
    K = {0: [[0.0, 0.0], [-1.0, 0.0]], 1: [[0.0, 0.0], [1.0, 0.0]], -1: np.zeros((2, 2))}
    return RingModel.from_matrices(M0, K, N=N, cubic=np.array([[0.0, 0.0], [-1.0, 0.0]]),
                                   parameter_label="k", name="duffing",
                                   meta={"a": a, "d": d, "k0": k0})


def duffing_family(a: float = 0.1, d: float = 0.3) -> Callable[[int], RingModel]:
    """``N -> RingModel`` for the Duffing ring with ``p`` equal to the coupling ``k``."""
    params = DuffingRingParams(a=a, d=d)
    return lambda N: make_duffing_ring(params, N)


# --- model files -------------------------------------------------------------

_MODEL_KEYS = {"n", "N", "R", "matrices", "K", "nonlinearity", "parameter_label", "name"}
_BUILTIN_NONLINEARITIES = {"duffing_cubic", "none"}


def _builtin_nonlinearity(spec: Mapping, n: int) -> np.ndarray:
    if not isinstance(spec, Mapping):
        raise ModelError("nonlinearity must be an object {name, params}")
    unknown = set(spec) - {"name", "params"}
    if unknown:
        raise ModelError(f"unknown nonlinearity keys: {sorted(unknown)}")
    name = spec.get("name")
    params = dict(spec.get("params", {}))
    if name not in _BUILTIN_NONLINEARITIES:
        raise ModelError(f"unknown nonlinearity {name!r}; builtins are {sorted(_BUILTIN_NONLINEARITIES)}")
    if name == "none":
        if params:
            raise ModelError("nonlinearity 'none' takes no params")
        return np.zeros((n, n))
    coeff = float(params.pop("coefficient", 1.0))
    source = int(params.pop("source", 0))
    target = int(params.pop("target", 1))
    if params:
        raise ModelError(f"unknown duffing_cubic params: {sorted(params)}")
    if not (0 <= source < n and 0 <= target < n):
        raise ModelError("duffing_cubic source/target outside node dimension")
    C = np.zeros((n, n))
    C[target, source] = -coeff
    return C


def model_from_dict(data: Mapping) -> RingModel:
    unknown = set(data) - _MODEL_KEYS
    if unknown:
        raise ModelError(f"unknown model keys: {sorted(unknown)}")
    try:
        n, N, R = int(data["n"]), int(data["N"]), int(data["R"])
        raw_M = data["matrices"]
    except KeyError as exc:
        raise ModelError(f"missing model key {exc.args[0]!r}") from None
    raw_K = data.get("K", {})

    def parse(raw):
        return {int(m): np.asarray(v, dtype=float).reshape(n, n) for m, v in raw.items()}

    try:
        M0, K = parse(raw_M), parse(raw_K)
    except ValueError as exc:
        raise ModelError(f"bad matrix entry: {exc}") from None
    cubic = _builtin_nonlinearity(data.get("nonlinearity", {"name": "none"}), n)
    return RingModel(n=n, N=N, R=R, M0=_stack(M0, R, n), K=_stack(K, R, n), cubic=cubic,
                     parameter_label=str(data.get("parameter_label", "p")),
                     name=str(data.get("name", "ring")))


def model_to_dict(model: RingModel) -> dict:
    if model.nonlinearity is not None and model.cubic is None:
        raise ModelError("only builtin nonlinearities can be serialised")
    out = {
        "n": model.n, "N": model.N, "R": model.R,
        "matrices": {str(m): model.M0[m + model.R].ravel().tolist() for m in model.offsets},
        "K": {str(m): model.K[m + model.R].ravel().tolist() for m in model.offsets},
        "parameter_label": model.parameter_label,
        "name": model.name,
    }
    if model.cubic is None or not np.any(model.cubic):
        out["nonlinearity"] = {"name": "none"}
    else:
        nonzero = np.argwhere(model.cubic)
        if len(nonzero) != 1:
            raise ModelError("only single-term cubic nonlinearities can be serialised")
        t, s = nonzero[0]
        out["nonlinearity"] = {"name": "duffing_cubic",
                               "params": {"coefficient": -float(model.cubic[t, s]),
                                          "source": int(s), "target": int(t)}}
    return out


def load_model(path: str | Path) -> RingModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
