"""Forward and backward sweeps over a detection record.

Both sweeps exist twice: a numba ``@njit`` kernel and a pure-numpy
reference. The numba path is used when numba imports and the environment
variable ``PQSPHOTON_DISABLE_NUMBA`` is unset or ``0``. The two paths
produce the same values up to floating-point rounding.

The relaxation map ``T`` enters as its three bands (see
``fock.relaxation_bands``); ``weights[s]`` is the measurement factor of
sample ``s + 1``, all ones for samples without a dispersive detection.
Each sweep returns ``(dists, log_norms, bad)`` where ``bad`` is the index
of the first step whose norm vanished, or -1.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_disabled() -> bool:
    return os.environ.get("PQSPHOTON_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = numba is not None and not _env_disabled()


def forward_sweep_numpy(diag, upper, lower, weights, prior):
    S, N = weights.shape
    dists = np.empty((S + 1, N))
    log_norms = np.zeros(S + 1)
    p = np.array(prior, dtype=float)
    dists[0] = p
    for s in range(S):
        q = diag * p
        q[:-1] += upper * p[1:]
        q[1:] += lower * p[:-1]
        q *= weights[s]
        c = q.sum()
        if not c > 0:
            dists[s + 1:] = np.nan
            return dists, log_norms, s
        p = q / c
        dists[s + 1] = p
        log_norms[s + 1] = np.log(c)
    return dists, log_norms, -1


def backward_sweep_numpy(diag, upper, lower, weights, terminal):
    S, N = weights.shape
    dists = np.empty((S + 1, N))
    log_norms = np.zeros(S + 1)
    e = np.array(terminal, dtype=float)
    dists[S] = e
    for s in range(S - 1, -1, -1):
        v = weights[s] * e
        u = diag * v
        u[1:] += upper * v[:-1]
        u[:-1] += lower * v[1:]
        c = u.sum()
        if not c > 0:
            dists[:s + 1] = np.nan
            return dists, log_norms, s
        e = u / c
        dists[s] = e
        log_norms[s] = np.log(c)
    return dists, log_norms, -1


if numba is not None:

    @numba.njit(cache=True)
    def forward_sweep_numba(diag, upper, lower, weights, prior):
        S, N = weights.shape
        dists = np.empty((S + 1, N))
        log_norms = np.zeros(S + 1)
        for n in range(N):
            dists[0, n] = prior[n]
        for s in range(S):
            c = 0.0
            for n in range(N):
                q = diag[n] * dists[s, n]
                if n + 1 < N:
                    q += upper[n] * dists[s, n + 1]
                if n > 0:
                    q += lower[n - 1] * dists[s, n - 1]
                q *= weights[s, n]
                dists[s + 1, n] = q
                c += q
            if not c > 0:
                dists[s + 1:, :] = np.nan
                return dists, log_norms, s
            inv = 1.0 / c
            for n in range(N):
                dists[s + 1, n] *= inv
            log_norms[s + 1] = np.log(c)
        return dists, log_norms, -1

    @numba.njit(cache=True)
    def backward_sweep_numba(diag, upper, lower, weights, terminal):
        S, N = weights.shape
        dists = np.empty((S + 1, N))
        log_norms = np.zeros(S + 1)
        v = np.empty(N)
        for n in range(N):
            dists[S, n] = terminal[n]
        for s in range(S - 1, -1, -1):
            for n in range(N):
                v[n] = weights[s, n] * dists[s + 1, n]
            c = 0.0
            for m in range(N):
                u = diag[m] * v[m]
                if m > 0:
                    u += upper[m - 1] * v[m - 1]
                if m + 1 < N:
                    u += lower[m] * v[m + 1]
                dists[s, m] = u
                c += u
            if not c > 0:
                dists[:s + 1, :] = np.nan
                return dists, log_norms, s
            inv = 1.0 / c
            for m in range(N):
                dists[s, m] *= inv
            log_norms[s] = np.log(c)
        return dists, log_norms, -1

else:  # pragma: no cover
    forward_sweep_numba = forward_sweep_numpy
    backward_sweep_numba = backward_sweep_numpy


def forward_sweep(diag, upper, lower, weights, prior):
    fn = forward_sweep_numba if USE_NUMBA else forward_sweep_numpy
    return fn(
        np.ascontiguousarray(diag, dtype=np.float64),
        np.ascontiguousarray(upper, dtype=np.float64),
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(prior, dtype=np.float64),
    )


def backward_sweep(diag, upper, lower, weights, terminal):
    fn = backward_sweep_numba if USE_NUMBA else backward_sweep_numpy
    return fn(
        np.ascontiguousarray(diag, dtype=np.float64),
        np.ascontiguousarray(upper, dtype=np.float64),
        np.ascontiguousarray(lower, dtype=np.float64),
        np.ascontiguousarray(weights, dtype=np.float64),
        np.ascontiguousarray(terminal, dtype=np.float64),
    )
