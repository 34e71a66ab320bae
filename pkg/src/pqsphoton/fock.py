"""Fock-space model: Ramsey meter response and cavity relaxation.

Photon-number distributions are plain 1-D float arrays of length
``params.n_max``; entry ``n`` is the weight of the Fock state ``|n>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

OUTCOMES = ("g", "e")
# j = +1 for g, -1 for e
_SIGN = {"g": 1.0, "e": -1.0}


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the cavity and the meter atoms (SI units).

    Defaults are the values of the Kastler-Brossel photon-box setup: an
    86 us sample period, 65 ms cavity damping time and a detector that
    registers 0.28 atoms per sample at 30 % efficiency.
    """

    n_max: int = 25
    phi0: float = math.pi / 4
    fringe_offset: float = 0.03
    fringe_contrast: float = 0.71
    phases: tuple = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
    t_sample: float = 86e-6
    t_cavity: float = 65e-3
    n_thermal: float = 0.074
    detection_efficiency: float = 0.30
    mean_atoms_per_sample: float = 0.28 / 0.30

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        problems = self.violations()
        if problems:
            raise ConfigError(problems)

    def violations(self) -> list[str]:
        """Return a message for every violated constraint (empty if valid)."""
        out = []
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 2:
            out.append(f"n_max must be an integer >= 2 (got {self.n_max!r})")
        if not self.t_sample > 0:
            out.append(f"t_sample must be > 0 (got {self.t_sample})")
        if not self.t_cavity > 0:
            out.append(f"t_cavity must be > 0 (got {self.t_cavity})")
        elif self.t_sample > 0 and self.t_sample / self.t_cavity >= 0.1:
            out.append(
                "t_sample/t_cavity must be < 0.1 for the first-order relaxation "
                f"step (got {self.t_sample / self.t_cavity:.4g})"
            )
        if not self.fringe_contrast >= 0:
            out.append(f"fringe_contrast must be >= 0 (got {self.fringe_contrast})")
        if not 0 <= self.fringe_offset + self.fringe_contrast <= 1:
            out.append("fringe_offset + fringe_contrast must lie in [0, 1]")
        elif abs(self.fringe_offset) + self.fringe_contrast > 1:
            out.append("|fringe_offset| + fringe_contrast must be <= 1")
        if len(self.phases) == 0:
            out.append("phases must be nonempty")
        if not 0 <= self.detection_efficiency <= 1:
            out.append(
                f"detection_efficiency must lie in [0, 1] (got {self.detection_efficiency})"
            )
        if not self.n_thermal >= 0:
            out.append(f"n_thermal must be >= 0 (got {self.n_thermal})")
        if not self.mean_atoms_per_sample >= 0:
            out.append(
                f"mean_atoms_per_sample must be >= 0 (got {self.mean_atoms_per_sample})"
            )
        if not out:
            edge = self.t_sample / self.t_cavity * (1 + self.n_thermal) * self.n_max
            if edge >= 1:
                out.append(
                    "t_sample*kappa*(1+n_thermal)*n_max must be < 1 so the relaxation "
                    f"step stays a nonnegative map (got {edge:.4g})"
                )
        return out

    @property
    def kappa(self) -> float:
        return 1.0 / self.t_cavity

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class AtomDetection(NamedTuple):
    outcome: str
    phase_index: int


@dataclass(frozen=True)
class Sample:
    """Atoms detected in one sample period.

    A resonant-injection sample keeps its detections for bookkeeping but is
    never used as a dispersive measurement.
    """

    detections: tuple = ()
    resonant_injection: bool = False

    def __post_init__(self):
        dets = tuple(AtomDetection(*d) for d in self.detections)
        for d in dets:
            if d.outcome not in _SIGN:
                raise ValueError(f"outcome must be 'g' or 'e', got {d.outcome!r}")
        object.__setattr__(self, "detections", dets)


def _check_phase(params: ModelParams, phase_index) -> None:
    if not 0 <= phase_index < params.n_phases:
        raise IndexError(
            f"phase_index {phase_index} out of range for {params.n_phases} phases"
        )


def fringe_probability(params: ModelParams, outcome: str, phase_index: int, n: int) -> float:
    """Probability to detect ``outcome`` for ``n`` photons at Ramsey phase ``phase_index``."""
    if not 0 <= n < params.n_max:
        raise IndexError(f"photon number {n} outside [0, {params.n_max})")
    _check_phase(params, phase_index)
    j = _SIGN[outcome]
    phase = params.phi0 * (n + 0.5) - params.phi0 / 2 - params.phases[phase_index]
    return (1 + j * params.fringe_offset + j * params.fringe_contrast * math.sin(phase)) / 2


def fringe_vector(params: ModelParams, outcome: str, phase_index: int) -> np.ndarray:
    """``fringe_probability`` for every n at once."""
    _check_phase(params, phase_index)
    j = _SIGN[outcome]
    n = np.arange(params.n_max)
    phase = params.phi0 * (n + 0.5) - params.phi0 / 2 - params.phases[phase_index]
    return (1 + j * params.fringe_offset + j * params.fringe_contrast * np.sin(phase)) / 2


def fringe_table(params: ModelParams) -> np.ndarray:
    """Array ``[outcome, phase_index, n]`` with outcome 0 = g, 1 = e."""
    return np.array(
        [[fringe_vector(params, a, k) for k in range(params.n_phases)] for a in OUTCOMES]
    )


def sample_weights(params: ModelParams, sample: Sample) -> np.ndarray:
    w = np.ones(params.n_max)
    if sample.resonant_injection:
        return w
    for det in sample.detections:
        w *= fringe_vector(params, det.outcome, det.phase_index)
    return w


def measurement_update(params: ModelParams, sample: Sample, dist) -> np.ndarray:
    """Bayes factor of one sample applied to ``dist``; the result is NOT renormalized."""
    dist = np.asarray(dist, dtype=float)
    if sample.resonant_injection or not sample.detections:
        return dist.copy()
    return sample_weights(params, sample) * dist


def relaxation_generator(params: ModelParams) -> np.ndarray:
    """Rate matrix K of the thermal birth-death process, ``dp/dt = K p``.

    The upward outflow of the top level is dropped so every column sums to
    zero on the truncated space.
    """
    n_max, kappa, nb = params.n_max, params.kappa, params.n_thermal
    n = np.arange(n_max, dtype=float)
    K = np.zeros((n_max, n_max))
    up_out = nb * (n + 1)
    up_out[-1] = 0.0
    K[n.astype(int), n.astype(int)] = -kappa * ((1 + nb) * n + up_out)
    idx = np.arange(n_max - 1)
    K[idx, idx + 1] = kappa * (1 + nb) * (idx + 1)
    K[idx + 1, idx] = kappa * nb * (idx + 1)
    return K


def relaxation_bands(params: ModelParams, dt: float | None = None):
    """Bands of ``T = I + dt*K`` as ``(diag, upper, lower)``.

    ``upper[n] = T[n, n+1]`` and ``lower[n] = T[n+1, n]``, both of length
    ``n_max - 1``.
    """
    dt = params.t_sample if dt is None else dt
    K = relaxation_generator(params)
    diag = 1.0 + dt * np.diag(K)
    upper = dt * np.diag(K, 1)
    lower = dt * np.diag(K, -1)
    return diag, upper, lower


def relaxation_matrix(params: ModelParams, dt: float | None = None) -> np.ndarray:
    dt = params.t_sample if dt is None else dt
    return np.eye(params.n_max) + dt * relaxation_generator(params)


def relaxation_step(params: ModelParams, dist, forward: bool = True, dt: float | None = None) -> np.ndarray:
    """Apply ``T`` (``forward=True``) or its transpose to ``dist``."""
    d, up, lo = relaxation_bands(params, dt)
    p = np.asarray(dist, dtype=float)
    out = d * p
    if forward:
        out[:-1] += up * p[1:]
        out[1:] += lo * p[:-1]
    else:
        out[1:] += up * p[:-1]
        out[:-1] += lo * p[1:]
    return out


def uniform(n_max: int) -> np.ndarray:
    return np.full(n_max, 1.0 / n_max)


def fock_state(n_max: int, n: int) -> np.ndarray:
    p = np.zeros(n_max)
    p[n] = 1.0
    return p


def thermal(n_max: int, n_thermal: float) -> np.ndarray:
    """Bose-Einstein distribution with mean ``n_thermal``, truncated and renormalized."""
    if n_thermal == 0:
        return fock_state(n_max, 0)
    ratio = n_thermal / (1 + n_thermal)
    p = ratio ** np.arange(n_max, dtype=float)
    return p / p.sum()


def normalize(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p / p.sum(axis=-1, keepdims=True)
