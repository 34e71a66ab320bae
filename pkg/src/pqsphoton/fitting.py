"""Least-squares fit of a decaying exponential with offset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FitError


@dataclass(frozen=True)
class ExpFit:
    """``amplitude * exp(-t / decay_time) + offset``; amplitude is referenced to t = 0."""

    amplitude: float
    decay_time: float
    offset: float
    fit_window_start: float
    residual_rms: float
    iterations: int = 0

    def __call__(self, t):
        return self.amplitude * np.exp(-np.asarray(t) / self.decay_time) + self.offset


def _initial_guess(t, y):
    n_tail = max(3, len(t) // 5)
    c = float(np.mean(y[-n_tail:]))
    y0 = float(y[0])
    a_first = y0 - c
    pos = (y - c) * np.sign(a_first) > 0
    tau = None
    if pos.sum() >= 2:
        slope = np.polyfit(t[pos], np.log(np.abs(y[pos] - c)), 1)[0]
        if slope < 0:
            tau = -1.0 / slope
    if tau is None:
        tau = (t[-1] - t[0]) / 3
    return np.array([a_first * np.exp(t[0] / tau), tau, c])


def _model(theta, t):
    a, tau, c = theta
    e = np.exp(-t / tau)
    return a * e + c, e


def fit_exponential(times, values, window_start: float = 0.035, xtol: float = 1e-8, max_iter: int = 200) -> ExpFit:
    """Fit ``a*exp(-t/tau) + c`` to the points with ``t >= window_start``.

    Levenberg-Marquardt from a deterministic start: ``c`` is the mean of
    the last fifth of the window, ``tau`` comes from a log-linear fit of
    ``values - c`` and ``a`` matches the first windowed value.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = t >= window_start
    t, y = t[keep], y[keep]
    if len(t) < 10:
        raise FitError(f"need at least 10 points after t = {window_start}, got {len(t)}")
    if not np.all(np.isfinite(y)):
        raise FitError("values contain non-finite entries")
    if np.ptp(y) == 0:
        raise FitError("data are constant; decay time is undefined")

    theta = _initial_guess(t, y)
    start = theta.copy()
    pred, e = _model(theta, t)
    r = y - pred
    cost = r @ r
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a, tau, _ = theta
        J = np.column_stack([e, a * e * t / tau**2, np.ones_like(t)])
        A = J.T @ J
        g = J.T @ r
        while True:
            step = np.linalg.solve(A + lam * np.diag(np.diag(A)), g)
            trial = theta + step
            if trial[1] > 0:
                pred_t, e_t = _model(trial, t)
                r_t = y - pred_t
                cost_t = r_t @ r_t
                if cost_t <= cost:
                    break
            lam *= 10
            if lam > 1e16:
                raise FitError("Levenberg-Marquardt step could not reduce the residual", start)
        theta, e, r, cost = trial, e_t, r_t, cost_t
        lam = max(lam / 10, 1e-12)
        if np.all(np.abs(step) <= xtol * np.maximum(np.abs(theta), 1e-300)):
            converged = True
            break
    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", start)
    a, tau, c = (float(v) for v in theta)
    return ExpFit(a, tau, c, float(window_start), float(np.sqrt(cost / len(t))), it)
