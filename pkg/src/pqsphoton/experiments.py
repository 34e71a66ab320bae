"""Ensemble runs of the two photon-counting experiments.

Experiment 1 starts from a coherent field, records 7000 meter samples and
compares the spread of the forward, backward and PQS estimates.
Experiment 2 injects a photon with a resonant sample in the middle of a
thermal-field record and measures when each analysis sees the jump.

Realizations are processed in fixed-size chunks; chunk sums are reduced in
chunk order, so results do not depend on the number of workers.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PQSError
from .estimator import SummarySeries, jump_time, map_jumps, smooth, summarize
from .fitting import ExpFit, fit_exponential
from .fock import ModelParams
from .simulate import (
    InitialState,
    Injection,
    SimConfig,
    calibrate_emission_probability,
    predicted_injected_photons,
    realization_rngs,
    select_single_g,
    selection_fraction,
    simulate_run,
)

log = logging.getLogger(__name__)

ANALYSES = ("forward", "backward", "pqs")
CHUNK = 25
EXP1_REALIZATIONS = 500
EXP2_RUNS = 4000
FULL_EXP1_REALIZATIONS = 6000
FULL_EXP2_RUNS = 16320
# first rising crossing is searched in this window around the injection
JUMP_WINDOW = (-0.020, 0.040)
FIT_WINDOW_START = 0.035


def experiment1_config(model: ModelParams | None = None, seed: int = 0) -> SimConfig:
    return SimConfig(
        model=model or ModelParams(),
        initial_state=InitialState.coherent(12.0),
        n_samples=7000,
        seed=seed,
    )


def experiment2_config(model: ModelParams | None = None, emission_probability: float | None = None, seed: int = 0) -> SimConfig:
    """Thermal start, 4000 samples, the resonant sample, 4000 more samples.

    The emission probability defaults to the value that reproduces the
    2962/16320 single-g selection fraction.
    """
    model = model or ModelParams()
    if emission_probability is None:
        emission_probability = calibrate_emission_probability(model)
    return SimConfig(
        model=model,
        initial_state=InitialState("thermal"),
        n_samples=8001,
        injection=Injection(4000, emission_probability),
        seed=seed,
    )


def default_workers() -> int:
    return max(1, int(os.environ.get("PQSPHOTON_WORKERS", "1")))


@dataclass
class EnsembleResult:
    experiment: int
    times: np.ndarray
    n_runs: int
    n_realizations: int
    avg_std: dict
    se_std: dict
    avg_mean: dict
    jump_times: dict = field(default_factory=dict)
    map_jumps: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    root_seed: int = 0
    emission_probability: float | None = None
    injected_photons: np.ndarray | None = None
    fit: ExpFit | None = None
    model: ModelParams | None = None
    # experiment 2: one row per selected run, columns ANALYSES, NaN where no crossing
    jump_table: np.ndarray | None = None

    @property
    def avg_std_forward(self):
        return self.avg_std["forward"]

    @property
    def avg_std_backward(self):
        return self.avg_std["backward"]

    @property
    def avg_std_pqs(self):
        return self.avg_std["pqs"]

    @property
    def avg_mean_forward(self):
        return self.avg_mean["forward"]

    @property
    def avg_mean_backward(self):
        return self.avg_mean["backward"]

    @property
    def avg_mean_pqs(self):
        return self.avg_mean["pqs"]

    @property
    def jump_times_pqs(self):
        return self.jump_times.get("pqs")

    @property
    def jump_times_forward(self):
        return self.jump_times.get("forward")

    @property
    def jump_times_backward(self):
        return self.jump_times.get("backward")

    @property
    def selection_fraction(self) -> float:
        return self.n_realizations / self.n_runs if self.n_runs else float("nan")

    def curve_crossing(self, analysis: str, threshold: float = 0.5, direction: str = "rising"):
        """Threshold crossing of the ensemble-averaged mean-photon curve."""
        avg = self.avg_mean[analysis]
        return jump_time(SummarySeries(self.times, avg, avg, avg, avg), threshold, direction)

    def summary(self) -> dict:
        out = {
            "experiment": self.experiment,
            "root_seed": self.root_seed,
            "n_runs": self.n_runs,
            "n_realizations": self.n_realizations,
            "failures": [{"index": i, "error": msg} for i, msg in self.failures],
        }
        if self.experiment == 1:
            out["map_jumps_ge8_total"] = {k: int(np.sum(v)) for k, v in self.map_jumps.items()}
            out["sigma_at_start"] = {k: float(v[0]) for k, v in self.avg_std.items()}
            out["sigma_at_end"] = {k: float(v[-1]) for k, v in self.avg_std.items()}
            return out
        out["selection_fraction"] = self.selection_fraction
        out["emission_probability"] = self.emission_probability
        out["calibration_target_fraction"] = 2962 / 16320
        for k in ANALYSES:
            jt = np.asarray(self.jump_times[k])
            out[f"jump_time_count_{k}"] = int(jt.size)
            out[f"jump_time_mean_{k}"] = float(jt.mean()) if jt.size else None
            out[f"jump_time_median_{k}"] = float(np.median(jt)) if jt.size else None
            out[f"jump_time_std_{k}"] = float(jt.std(ddof=1)) if jt.size > 1 else None
            out[f"curve_crossing_{k}"] = self.curve_crossing(k)
        if self.injected_photons is not None and self.injected_photons.size:
            out["mean_injected_photons_selected"] = float(self.injected_photons.mean())
        if self.emission_probability is not None and self.model is not None:
            out["predicted_amplitude"] = predicted_injected_photons(self.model, self.emission_probability)
        if self.fit is not None:
            out["fit"] = {
                "amplitude": self.fit.amplitude,
                "decay_time": self.fit.decay_time,
                "offset": self.fit.offset,
                "fit_window_start": self.fit.fit_window_start,
                "residual_rms": self.fit.residual_rms,
            }
        return out


class _Acc:
    """Running sums over realizations, added in a fixed order."""

    def __init__(self, length):
        self.n = 0
        self.std = {k: np.zeros(length) for k in ANALYSES}
        self.std2 = {k: np.zeros(length) for k in ANALYSES}
        self.mean = {k: np.zeros(length) for k in ANALYSES}

    def add(self, summaries):
        self.n += 1
        for k, s in summaries.items():
            self.std[k] += s.std_n
            self.std2[k] += s.std_n * s.std_n
            self.mean[k] += s.mean_n

    def merge(self, other):
        self.n += other.n
        for k in ANALYSES:
            self.std[k] += other.std[k]
            self.std2[k] += other.std2[k]
            self.mean[k] += other.mean[k]


def _window(series: SummarySeries, lo: float, hi: float) -> SummarySeries:
    sel = (series.times >= lo) & (series.times <= hi)
    return SummarySeries(
        series.times[sel], series.mean_n[sel], series.std_n[sel], series.map_n[sel], series.map_prob[sel]
    )


def _chunk(task):
    experiment, config, root_seed, start, stop, window = task
    S = config.n_samples
    acc = _Acc(S + 1)
    failures, maps, jumps, injected = [], [], [], []
    n_runs = 0
    t_origin = config.injection_time or 0.0
    for offset, rng in enumerate(realization_rngs(root_seed, stop - start, start)):
        index = start + offset
        n_runs += 1
        try:
            record = simulate_run(config, rng)
            if experiment == 2:
                if not select_single_g([record], config.injection.at_sample):
                    continue
                injected.append(record.meta["injected_photons"])
                record = record.without_truth()
            traj = smooth(config.model, record)
        except PQSError as exc:
            log.warning("realization %d failed: %s", index, exc)
            failures.append((index, f"{type(exc).__name__}: {exc}"))
            continue
        times = traj.times - t_origin
        summaries = {k: summarize(getattr(traj, k), times) for k in ANALYSES}
        acc.add(summaries)
        if experiment == 1:
            maps.append([map_jumps(summaries[k]) for k in ANALYSES])
        else:
            jumps.append([jump_time(_window(summaries[k], *window)) for k in ANALYSES])
    return acc, n_runs, failures, maps, jumps, injected


def _run(experiment, config, n_runs, seed, workers, window=JUMP_WINDOW):
    tasks = [
        (experiment, config, seed, lo, min(lo + CHUNK, n_runs), window)
        for lo in range(0, n_runs, CHUNK)
    ]
    workers = default_workers() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, tasks))
    else:
        parts = [_chunk(t) for t in tasks]

    total = _Acc(config.n_samples + 1)
    failures, maps, jumps, injected = [], [], [], []
    runs = 0
    for acc, n, f, m, j, inj in parts:
        total.merge(acc)
        runs += n
        failures += f
        maps += m
        jumps += j
        injected += inj
    n = total.n
    times = np.arange(config.n_samples + 1) * config.model.t_sample - (config.injection_time or 0.0)
    if n:
        avg_std = {k: total.std[k] / n for k in ANALYSES}
        var = {k: np.clip(total.std2[k] / n - avg_std[k] ** 2, 0, None) for k in ANALYSES}
        se = {k: np.sqrt(var[k] / max(n - 1, 1)) for k in ANALYSES}
        avg_mean = {k: total.mean[k] / n for k in ANALYSES}
    else:
        nan = np.full(len(times), np.nan)
        avg_std = {k: nan for k in ANALYSES}
        se = {k: nan for k in ANALYSES}
        avg_mean = {k: nan for k in ANALYSES}
    result = EnsembleResult(
        experiment=experiment,
        times=times,
        n_runs=runs,
        n_realizations=n,
        avg_std=avg_std,
        se_std=se,
        avg_mean=avg_mean,
        failures=failures,
        root_seed=seed,
    )
    result.model = config.model
    if experiment == 1:
        arr = np.array(maps, dtype=np.int64).reshape(-1, 3)
        result.map_jumps = {k: arr[:, i] for i, k in enumerate(ANALYSES)}
    else:
        result.jump_times = {
            k: np.array([row[i] for row in jumps if row[i] is not None]) for i, k in enumerate(ANALYSES)
        }
        result.jump_table = np.array(
            [[np.nan if x is None else x for x in row] for row in jumps], dtype=float
        ).reshape(-1, len(ANALYSES))
        result.injected_photons = np.array(injected, dtype=np.int64)
        result.emission_probability = config.injection.emission_probability
    return result


def run_experiment1(config: SimConfig | None = None, n_realizations: int = EXP1_REALIZATIONS, seed: int | None = None, workers: int | None = None) -> EnsembleResult:
    """Forward/backward/PQS spread over an ensemble of coherent-state runs.

    Every realization is analysed from a uniform prior, discarding the
    knowledge of the prepared state. Failed realizations are listed in
    ``failures`` and left out of the averages.
    """
    config = config or experiment1_config()
    seed = config.seed if seed is None else seed
    return _run(1, config, n_realizations, seed, workers)


def run_experiment2(
    config: SimConfig | None = None,
    n_runs: int = EXP2_RUNS,
    seed: int | None = None,
    workers: int | None = None,
    jump_window=JUMP_WINDOW,
    fit_window_start: float = FIT_WINDOW_START,
) -> EnsembleResult:
    """Induced-jump runs: simulate ``n_runs`` records, keep the single-g ones,
    time the jump in every analysis and fit the PQS decay after the jump.

    Times are relative to the injection sample.
    """
    config = config or experiment2_config()
    if config.injection is None:
        raise ValueError("experiment 2 needs an injection sample")
    seed = config.seed if seed is None else seed
    result = _run(2, config, n_runs, seed, workers, jump_window)
    if result.n_realizations:
        try:
            result.fit = fit_exponential(result.times, result.avg_mean_pqs, fit_window_start)
        except PQSError as exc:
            log.warning("exponential fit failed: %s", exc)
    return result


def expected_selection_fraction(config: SimConfig) -> float:
    return selection_fraction(config.model, config.injection.emission_probability)
