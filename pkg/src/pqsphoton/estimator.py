"""Forward, backward and past-quantum-state photon-number estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import DisjointSupportError, InconsistentRecordError
from .fock import ModelParams, normalize, relaxation_bands, uniform
from .record import DetectionRecord


@dataclass(frozen=True, eq=False)
class SmoothedTrajectory:
    """Distributions at ``times[s] = s * t_sample`` for ``s = 0..S``.

    ``forward[s]`` uses samples ``1..s``, ``backward[s]`` uses samples
    ``s+1..S`` and ``pqs[s]`` is their normalized product.
    ``log_norms_forward[s]`` is the log normalization of forward step
    ``s`` (0 at ``s = 0``); ``log_norms_backward[s]`` likewise for the
    backward step into ``s`` (0 at ``s = S``).
    """

    times: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    pqs: np.ndarray
    log_norms_forward: np.ndarray
    log_norms_backward: np.ndarray

    def log_likelihood_profile(self) -> np.ndarray:
        """``log <rho~(t_s), E~(t_s)>`` for every ``s`` from the stored norms.

        Constant in ``s`` up to rounding; each entry is the log likelihood
        of the whole record under the prior and terminal vectors.
        """
        cf = np.cumsum(self.log_norms_forward)
        cb = np.cumsum(self.log_norms_backward[::-1])[::-1]
        overlap = np.einsum("sn,sn->s", self.forward, self.backward)
        return cf + cb + np.log(overlap)


@dataclass(frozen=True, eq=False)
class SummarySeries:
    times: np.ndarray
    mean_n: np.ndarray
    std_n: np.ndarray
    map_n: np.ndarray
    map_prob: np.ndarray


def _check(bad: int, direction: str) -> None:
    if bad >= 0:
        raise InconsistentRecordError(
            f"{direction} filter: distribution annihilated by sample {bad + 1}"
        )


def forward_filter(params: ModelParams, record: DetectionRecord, prior=None, weights=None):
    """Filtered distributions ``P^rho(., t_s)`` for ``s = 0..S``.

    Each step relaxes over one sample period then applies that sample's
    measurement factor. Returns ``(dists, log_norms)``; the prior defaults
    to uniform.
    """
    if prior is None:
        prior = uniform(params.n_max)
    if weights is None:
        weights = record.measurement_weights()
    d, up, lo = relaxation_bands(params)
    dists, log_norms, bad = _accel.forward_sweep(d, up, lo, weights, normalize(prior))
    _check(bad, "forward")
    return dists, log_norms


def backward_filter(params: ModelParams, record: DetectionRecord, terminal=None, weights=None):
    """Effect distributions ``P^E(., t_s)`` for ``s = 0..S``.

    Runs from ``t_S`` where it equals ``terminal`` (uniform by default);
    the step into ``t_s`` applies sample ``s+1``'s factor and then the
    transposed relaxation map.
    """
    if terminal is None:
        terminal = uniform(params.n_max)
    if weights is None:
        weights = record.measurement_weights()
    d, up, lo = relaxation_bands(params)
    dists, log_norms, bad = _accel.backward_sweep(d, up, lo, weights, normalize(terminal))
    _check(bad, "backward")
    return dists, log_norms


def combine_pqs(forward, backward) -> np.ndarray:
    """Normalized entrywise product; works on single distributions or stacks."""
    prod = np.asarray(forward, dtype=float) * np.asarray(backward, dtype=float)
    norm = prod.sum(axis=-1, keepdims=True)
    if np.any(norm <= 0):
        raise DisjointSupportError("forward and backward distributions have disjoint support")
    return prod / norm


def smooth(params: ModelParams, record: DetectionRecord, prior=None, terminal=None) -> SmoothedTrajectory:
    weights = record.measurement_weights()
    fwd, lf = forward_filter(params, record, prior, weights)
    bwd, lb = backward_filter(params, record, terminal, weights)
    return SmoothedTrajectory(
        times=np.arange(record.n_samples + 1) * params.t_sample,
        forward=fwd,
        backward=bwd,
        pqs=combine_pqs(fwd, bwd),
        log_norms_forward=lf,
        log_norms_backward=lb,
    )


def summarize(dists, times=None) -> SummarySeries:
    """Mean, standard deviation and most likely photon number per time.

    Ties for the most likely state go to the smaller photon number.
    """
    p = np.atleast_2d(np.asarray(dists, dtype=float))
    n = np.arange(p.shape[1], dtype=float)
    mean = p @ n
    var = p @ (n * n) - mean * mean
    std = np.sqrt(np.clip(var, 0.0, None))
    map_n = np.argmax(p, axis=1)
    map_prob = p[np.arange(len(p)), map_n]
    if times is None:
        times = np.arange(len(p), dtype=float)
    return SummarySeries(np.asarray(times, dtype=float), mean, std, map_n, map_prob)


def jump_time(series: SummarySeries, threshold: float = 0.5, direction: str = "rising"):
    """Time at which ``mean_n`` first crosses ``threshold``, or None.

    A rising crossing goes from below the threshold to at or above it;
    falling is the mirror image. The crossing time is interpolated
    linearly between the bracketing samples.
    """
    m = series.mean_n
    if direction == "rising":
        hits = np.flatnonzero((m[:-1] < threshold) & (m[1:] >= threshold))
    elif direction == "falling":
        hits = np.flatnonzero((m[:-1] > threshold) & (m[1:] <= threshold))
    else:
        raise ValueError(f"direction must be 'rising' or 'falling', got {direction!r}")
    if hits.size == 0:
        return None
    k = hits[0]
    t0, t1 = series.times[k], series.times[k + 1]
    frac = (threshold - m[k]) / (m[k + 1] - m[k])
    return float(t0 + frac * (t1 - t0))


def map_jumps(series: SummarySeries, min_size: int = 8) -> int:
    """Number of consecutive-time MAP changes of at least ``min_size`` photons."""
    return int(np.count_nonzero(np.abs(np.diff(series.map_n)) >= min_size))
