"""Compiled kernels for rings with linear coupling and a local cubic term.

The right-hand side handled here is

    dy_j/dt = sum_m A[m] y_{j+m-R} + h_j,   h_j[t] = sum_s C[t, s] * y_j[s]**3

with ``A`` of shape (2R+1, n, n) and ``C`` of shape (n, n). States are flat
arrays of length N*n (node-major); tangent blocks are (N*n, k) so the inner
loops run over the tangent vectors. Everything else goes through the generic numpy path.
"""

import numpy as np
from numba import njit


def sparse_terms(A, C):
    """Flatten ``A`` and ``C`` into coordinate lists of their nonzero entries."""
    R = (A.shape[0] - 1) // 2
    mi, a, b = np.nonzero(A)
    lin = (
        a.astype(np.int64),
        (mi - R).astype(np.int64),
        b.astype(np.int64),
        A[mi, a, b].astype(np.float64),
    )
    t, s = np.nonzero(C)
    cub = (t.astype(np.int64), s.astype(np.int64), C[t, s].astype(np.float64))
    return lin, cub


@njit(cache=True)
def rhs(y, lin, cub, n, out):
    la, lm, lb, lw = lin
    ct, cs, cc = cub
    m = y.size
    N = m // n
    out[:] = 0.0
    for j in range(N):
        base = j * n
        for e in range(la.size):
            jj = j + lm[e]
            if jj < 0 or jj >= N:
                jj %= N
            out[base + la[e]] += lw[e] * y[jj * n + lb[e]]
        for e in range(ct.size):
            v = y[base + cs[e]]
            out[base + ct[e]] += cc[e] * v * v * v


@njit(cache=True)
def tangent(y, V, lin, cub, n, out):
    """Apply the Jacobian at ``y`` to the tangent block ``V`` of shape (N*n, k)."""
    la, lm, lb, lw = lin
    ct, cs, cc = cub
    m = y.size
    N = m // n
    k = V.shape[1]
    out[:] = 0.0
    for j in range(N):
        base = j * n
        for e in range(la.size):
            jj = j + lm[e]
            if jj < 0 or jj >= N:
                jj %= N
            w = lw[e]
            src = V[jj * n + lb[e]]
            dst = out[base + la[e]]
            for q in range(k):
                dst[q] += w * src[q]
        for e in range(ct.size):
            v = y[base + cs[e]]
            w = 3.0 * cc[e] * v * v
            src = V[base + cs[e]]
            dst = out[base + ct[e]]
            for q in range(k):
                dst[q] += w * src[q]


@njit(cache=True)
def _finite(x):
    for v in x.flat:
        if not np.isfinite(v):
            return False
    return True


@njit(cache=True)
def rk4_advance(y, lin, cub, n, dt, nsteps):
    """Advance ``y`` in place by ``nsteps`` classical RK4 steps; return False on overflow."""
    m = y.size
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    h2 = 0.5 * dt
    w = dt / 6.0
    for _ in range(nsteps):
        rhs(y, lin, cub, n, k1)
        for i in range(m):
            tmp[i] = y[i] + h2 * k1[i]
        rhs(tmp, lin, cub, n, k2)
        for i in range(m):
            tmp[i] = y[i] + h2 * k2[i]
        rhs(tmp, lin, cub, n, k3)
        for i in range(m):
            tmp[i] = y[i] + dt * k3[i]
        rhs(tmp, lin, cub, n, k4)
        for i in range(m):
            y[i] += w * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])
    return _finite(y)


@njit(cache=True)
def rk4_record(y, lin, cub, n, dt, nsteps, stride):
    """Advance ``y`` and return the states every ``stride`` steps (first row is the input)."""
    nrec = nsteps // stride + 1
    out = np.empty((nrec, y.size))
    out[0] = y
    for r in range(1, nrec):
        ok = rk4_advance(y, lin, cub, n, dt, stride)
        out[r] = y
        if not ok:
            return out[: r + 1], False
    return out, True


@njit(cache=True)
def mgs(V, diag):
    """Modified Gram-Schmidt on the columns of ``V`` in place; norms go to ``diag``."""
    m, k = V.shape
    for q in range(k):
        for p in range(q):
            dot = 0.0
            for i in range(m):
                dot += V[i, p] * V[i, q]
            for i in range(m):
                V[i, q] -= dot * V[i, p]
        nrm = 0.0
        for i in range(m):
            nrm += V[i, q] * V[i, q]
        nrm = np.sqrt(nrm)
        diag[q] = nrm
        if nrm > 0.0:
            for i in range(m):
                V[i, q] /= nrm


@njit(cache=True)
def rk4_tangent_block(y, V, lin, cub, n, dt, nsteps):
    """Advance state and tangent vectors together through ``nsteps`` RK4 steps."""
    m, k = V.shape
    ky = np.empty((4, m))
    kv = np.empty((4, m, k))
    ty = np.empty(m)
    tv = np.empty((m, k))
    h2 = 0.5 * dt
    w = dt / 6.0
    for _ in range(nsteps):
        rhs(y, lin, cub, n, ky[0])
        tangent(y, V, lin, cub, n, kv[0])
        for stage in range(1, 4):
            h = dt if stage == 3 else h2
            for i in range(m):
                ty[i] = y[i] + h * ky[stage - 1, i]
                for q in range(k):
                    tv[i, q] = V[i, q] + h * kv[stage - 1, i, q]
            rhs(ty, lin, cub, n, ky[stage])
            tangent(ty, tv, lin, cub, n, kv[stage])
        for i in range(m):
            y[i] += w * (ky[0, i] + 2.0 * (ky[1, i] + ky[2, i]) + ky[3, i])
            for q in range(k):
                V[i, q] += w * (kv[0, i, q] + 2.0 * (kv[1, i, q] + kv[2, i, q]) + kv[3, i, q])


@njit(cache=True)
def lyapunov_blocks(y, V, lin, cub, n, dt, steps_per_block, nblocks, logs):
    """Run ``nblocks`` renormalisation blocks, writing log stretch factors into ``logs``.

    Returns the number of completed blocks; stops early when a stretch factor
    underflows or the state stops being finite. The tangent block is left as
    it was at the start of the failing block so the caller can retry.
    """
    k = V.shape[1]
    diag = np.empty(k)
    y_save = y.copy()
    V_save = V.copy()
    for b in range(nblocks):
        y_save[:] = y
        V_save[:] = V
        rk4_tangent_block(y, V, lin, cub, n, dt, steps_per_block)
        if not (_finite(y) and _finite(V)):
            y[:] = y_save
            V[:] = V_save
            return b
        mgs(V, diag)
        for q in range(k):
            if not diag[q] > 1e-290:
                y[:] = y_save
                V[:] = V_save
                return b
        for q in range(k):
            logs[b, q] = np.log(diag[q])
    return nblocks
