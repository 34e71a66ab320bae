"""Synthetic experiments: true photon-number trajectories and meter records.

A run draws, in this order from one generator: the resonant injection
sample (if any), the true trajectory with the injected photons inserted,
and finally the dispersive detections. Drawing the injection first lets
the truth include the photons it creates without rejection sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

from .errors import ConfigError, TruncationOverflowError
from .fock import ModelParams, fringe_table, thermal
from .record import DetectionRecord, TruthTrajectory

# Reference post-selection: 2962 single-g runs out of 16320.
SELECTION_FRACTION_TARGET = 2962 / 16320
# Largest Poisson mass allowed at or above n_max - 3 for a coherent start.
COHERENT_TAIL_MAX = 1e-2


@dataclass(frozen=True)
class InitialState:
    kind: str = "thermal"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("coherent", "thermal", "fock"):
            raise ConfigError(f"unknown initial state kind {self.kind!r}")

    @classmethod
    def coherent(cls, mean: float) -> "InitialState":
        return cls("coherent", float(mean))

    @classmethod
    def fock(cls, n: int) -> "InitialState":
        return cls("fock", int(n))

    def __str__(self):
        if self.kind == "thermal":
            return "thermal"
        if self.kind == "fock":
            return f"fock:{int(self.value)}"
        return f"coherent:{self.value!r}"

    @classmethod
    def parse(cls, text: str) -> "InitialState":
        kind, _, value = text.strip().partition(":")
        kind = kind.strip().lower()
        if kind == "thermal":
            return cls("thermal")
        if kind == "fock":
            return cls.fock(int(value))
        if kind == "coherent":
            return cls.coherent(float(value))
        raise ConfigError(f"unknown initial state {text!r}")


@dataclass(frozen=True)
class Injection:
    at_sample: int
    emission_probability: float = 0.95


@dataclass(frozen=True)
class SimConfig:
    model: ModelParams = ModelParams()
    initial_state: InitialState = InitialState()
    n_samples: int = 7000
    injection: Injection | None = None
    seed: int = 0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError(problems)

    def violations(self) -> list[str]:
        out = []
        if self.n_samples < 1:
            out.append(f"n_samples must be >= 1 (got {self.n_samples})")
        inj = self.injection
        if inj is not None:
            if not 0 <= inj.at_sample < self.n_samples:
                out.append(f"injection sample {inj.at_sample} must lie in [0, n_samples)")
            if not 0 <= inj.emission_probability <= 1:
                out.append("emission_probability must lie in [0, 1]")
        init = self.initial_state
        top = self.model.n_max - 3
        if init.kind == "fock" and not 0 <= init.value < top:
            out.append(f"fock initial state must lie in [0, {top})")
        if init.kind == "coherent":
            if init.value < 0:
                out.append("coherent mean must be >= 0")
            else:
                tail = stats.poisson.sf(top - 1, init.value)
                if tail >= COHERENT_TAIL_MAX:
                    out.append(
                        f"coherent mean {init.value} puts {tail:.3g} probability at or above "
                        f"n = {top}; raise n_max"
                    )
        return out

    @property
    def duration(self) -> float:
        return self.n_samples * self.model.t_sample

    @property
    def injection_time(self) -> float | None:
        if self.injection is None:
            return None
        return (self.injection.at_sample + 1) * self.model.t_sample


class InjectionDraw(NamedTuple):
    """Outcome of the resonant sample: atoms present, photons emitted, g/e detections."""

    n_atoms: int
    n_emitted: int
    n_g: int
    n_e: int


def realization_rngs(root_seed: int, count: int, offset: int = 0) -> list[np.random.Generator]:
    """Independent generators for realizations ``offset .. offset+count-1``.

    Stream ``i`` depends only on ``(root_seed, i)``, so any subset of an
    ensemble can be regenerated on its own.
    """
    return [
        np.random.default_rng(np.random.SeedSequence(root_seed, spawn_key=(i,)))
        for i in range(offset, offset + count)
    ]


def draw_initial_n(config: SimConfig, rng: np.random.Generator) -> int:
    init = config.initial_state
    if init.kind == "fock":
        return int(init.value)
    if init.kind == "coherent":
        return int(rng.poisson(init.value))
    p = thermal(config.model.n_max, config.model.n_thermal)
    return int(rng.choice(len(p), p=p))


def draw_injection(config: SimConfig, rng: np.random.Generator) -> InjectionDraw | None:
    """Resonant sample: each atom emits with ``emission_probability`` and is
    detected (in g iff it emitted) with the detector efficiency."""
    if config.injection is None:
        return None
    m = config.model
    n_atoms = int(rng.poisson(m.mean_atoms_per_sample))
    emitted = rng.random(n_atoms) < config.injection.emission_probability
    detected = rng.random(n_atoms) < m.detection_efficiency
    return InjectionDraw(
        n_atoms,
        int(emitted.sum()),
        int((emitted & detected).sum()),
        int((~emitted & detected).sum()),
    )


def simulate_truth(config: SimConfig, rng: np.random.Generator, injection: InjectionDraw | None = None) -> TruthTrajectory:
    """Exact event-time simulation of the thermal birth-death process.

    Down-jumps fire at rate ``kappa*(1+n_b)*n`` and up-jumps at
    ``kappa*n_b*(n+1)``. Photons emitted by the resonant sample are added
    as unit jumps at the injection time.
    """
    m = config.model
    kappa, nb = m.kappa, m.n_thermal
    t_end = config.duration
    ceiling = m.n_max - 1
    n = draw_initial_n(config, rng)
    initial = n
    if n >= ceiling:
        raise TruncationOverflowError(f"initial photon number {n} reaches n_max - 1 = {ceiling}")
    t_inj = config.injection_time
    n_inj = injection.n_emitted if injection is not None else 0
    times, values = [], [n]
    t = 0.0
    while True:
        down = kappa * (1 + nb) * n
        up = kappa * nb * (n + 1)
        total = down + up
        dt = rng.exponential(1.0 / total) if total > 0 else math.inf
        if t_inj is not None and n_inj and t + dt >= t_inj > t:
            # memorylessness: the clock restarts after the injected jumps
            t = t_inj
            for _ in range(n_inj):
                n += 1
                times.append(t)
                values.append(n)
            n_inj = 0
            if n >= ceiling:
                raise TruncationOverflowError(f"photon number reached n_max - 1 = {ceiling}")
            continue
        t += dt
        if t >= t_end:
            break
        n += 1 if rng.random() * total < up else -1
        if n >= ceiling:
            raise TruncationOverflowError(f"photon number reached n_max - 1 = {ceiling}")
        times.append(t)
        values.append(n)
    return TruthTrajectory(np.array(times), np.array(values), initial)


def phase_schedule(config: SimConfig) -> np.ndarray:
    """Round-robin Ramsey phase index per sample."""
    return np.arange(config.n_samples) % config.model.n_phases


def generate_record(
    config: SimConfig,
    truth: TruthTrajectory,
    rng: np.random.Generator,
    injection: InjectionDraw | None = None,
) -> DetectionRecord:
    """Sample the meter atoms against ``truth``.

    The true atom number per sample is Poisson; each atom is detected with
    the detector efficiency and its g/e outcome follows the Ramsey fringe
    at the true photon number of that sample.
    """
    m = config.model
    S = config.n_samples
    phases = phase_schedule(config)
    atoms = rng.poisson(m.mean_atoms_per_sample, S)
    detected = rng.binomial(atoms, m.detection_efficiency)
    n_true = truth.n_at((np.arange(S) + 1) * m.t_sample)
    p_g = fringe_table(m)[0, phases, n_true]
    n_g = rng.binomial(detected, p_g)
    n_e = detected - n_g
    resonant = ()
    meta = {}
    if config.injection is not None:
        k = config.injection.at_sample
        if injection is None:
            raise ValueError("configuration has an injection sample but no injection draw")
        n_g[k] = injection.n_g
        n_e[k] = injection.n_e
        resonant = (k,)
        meta = {
            "injection_sample": k,
            "injected_photons": injection.n_emitted,
            "injection_atoms": injection.n_atoms,
        }
    return DetectionRecord(m, phases, n_g, n_e, resonant, truth, config.seed, meta)


def simulate_run(config: SimConfig, rng: np.random.Generator) -> DetectionRecord:
    inj = draw_injection(config, rng)
    truth = simulate_truth(config, rng, inj)
    return generate_record(config, truth, rng, inj)


def select_single_g(records, injection_sample: int) -> list[DetectionRecord]:
    """Records whose injection sample holds exactly one g and no e detection."""
    return [
        r for r in records
        if r.n_g[injection_sample] == 1 and r.n_e[injection_sample] == 0
    ]


def selection_fraction(params: ModelParams, emission_probability: float) -> float:
    """Probability that the resonant sample yields exactly one g and no e.

    Detected-emitting and detected-silent atoms are independent Poisson
    counts, so the fraction is ``mu*p*exp(-mu)`` with ``mu`` the mean
    detected atom number.
    """
    mu = params.mean_atoms_per_sample * params.detection_efficiency
    return mu * emission_probability * math.exp(-mu)


def calibrate_emission_probability(params: ModelParams, target: float = SELECTION_FRACTION_TARGET) -> float:
    p = target / selection_fraction(params, 1.0)
    if not 0 <= p <= 1:
        raise ConfigError(
            f"no emission probability in [0, 1] reaches selection fraction {target:.4g} "
            f"(would need {p:.4g})"
        )
    return p


def predicted_injected_photons(params: ModelParams, emission_probability: float) -> float:
    """Mean photons injected in post-selected runs: the detected emitter plus
    the undetected emitters, Poisson with mean ``lambda*(1-eta)*p``."""
    return 1.0 + params.mean_atoms_per_sample * (1 - params.detection_efficiency) * emission_probability
