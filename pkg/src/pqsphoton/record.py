"""Detection records and ground-truth trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fock import AtomDetection, ModelParams, Sample, fringe_table


@dataclass(frozen=True, eq=False)
class TruthTrajectory:
    """Piecewise-constant photon number: ``photon_numbers[k]`` holds on
    ``[jump_times[k-1], jump_times[k])`` with ``jump_times[-1]`` read as 0."""

    jump_times: np.ndarray
    photon_numbers: np.ndarray
    initial_n: int

    def __post_init__(self):
        object.__setattr__(self, "jump_times", np.asarray(self.jump_times, dtype=float))
        object.__setattr__(self, "photon_numbers", np.asarray(self.photon_numbers, dtype=np.int64))
        if len(self.photon_numbers) != len(self.jump_times) + 1:
            raise ValueError("photon_numbers must have one more entry than jump_times")
        if len(self.photon_numbers) and self.photon_numbers[0] != self.initial_n:
            raise ValueError("photon_numbers[0] must equal initial_n")

    def n_at(self, t):
        """Photon number at time(s) ``t``; a jump at exactly ``t`` is already applied."""
        idx = np.searchsorted(self.jump_times, t, side="right")
        return self.photon_numbers[idx]

    def __eq__(self, other):
        if not isinstance(other, TruthTrajectory):
            return NotImplemented
        return (
            self.initial_n == other.initial_n
            and np.array_equal(self.jump_times, other.jump_times)
            and np.array_equal(self.photon_numbers, other.photon_numbers)
        )


@dataclass(frozen=True, eq=False)
class DetectionRecord:
    """A run of ``n_samples`` meter samples.

    Columnar storage: sample ``s`` (0-based, detected at ``(s+1)*t_sample``)
    was probed at Ramsey phase ``phase_index[s]`` and yielded ``n_g[s]``
    atoms in g and ``n_e[s]`` atoms in e. Samples listed in
    ``resonant_samples`` are injection samples, never dispersive meters.
    """

    params: ModelParams
    phase_index: np.ndarray
    n_g: np.ndarray
    n_e: np.ndarray
    resonant_samples: tuple = ()
    truth: TruthTrajectory | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("phase_index", "n_g", "n_e"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "resonant_samples", tuple(int(s) for s in self.resonant_samples))
        S = len(self.phase_index)
        if len(self.n_g) != S or len(self.n_e) != S:
            raise ValueError("phase_index, n_g and n_e must have equal length")
        if S and (self.phase_index.min() < 0 or self.phase_index.max() >= self.params.n_phases):
            raise IndexError("phase_index out of range")
        if S and (self.n_g.min() < 0 or self.n_e.min() < 0):
            raise ValueError("detection counts must be nonnegative")
        if any(not 0 <= s < S for s in self.resonant_samples):
            raise IndexError("resonant sample index out of range")

    @property
    def n_samples(self) -> int:
        return len(self.phase_index)

    @property
    def duration(self) -> float:
        return self.n_samples * self.params.t_sample

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_samples + 1) * self.params.t_sample

    @property
    def detected_counts(self) -> np.ndarray:
        return self.n_g + self.n_e

    @property
    def resonant_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_samples, dtype=bool)
        mask[list(self.resonant_samples)] = True
        return mask

    def measurement_weights(self) -> np.ndarray:
        """Per-sample Bayes factors, shape ``(n_samples, n_max)``."""
        table = fringe_table(self.params)
        k = self.phase_index
        ng = np.where(self.resonant_mask, 0, self.n_g)
        ne = np.where(self.resonant_mask, 0, self.n_e)
        w = np.ones((self.n_samples, self.params.n_max))
        # most samples hold 0 or 1 atom; avoid pow for those
        one_g = ng == 1
        w[one_g] = table[0, k[one_g]]
        one_e = ne == 1
        w[one_e] *= table[1, k[one_e]]
        many_g = ng > 1
        w[many_g] *= table[0, k[many_g]] ** ng[many_g, None]
        many_e = ne > 1
        w[many_e] *= table[1, k[many_e]] ** ne[many_e, None]
        return w

    @property
    def samples(self) -> list[Sample]:
        resonant = self.resonant_mask
        return [
            Sample(
                detections=tuple(
                    [AtomDetection("g", int(k))] * int(g) + [AtomDetection("e", int(k))] * int(e)
                ),
                resonant_injection=bool(r),
            )
            for k, g, e, r in zip(self.phase_index, self.n_g, self.n_e, resonant)
        ]

    @classmethod
    def from_samples(cls, params: ModelParams, samples, phase_index=None, **kwargs) -> "DetectionRecord":
        """Build a record from ``Sample`` objects.

        Atoms of one sample must share a phase. Empty samples take their
        phase from ``phase_index`` when given, else round-robin order.
        """
        S = len(samples)
        if phase_index is None:
            phases = np.arange(S) % params.n_phases
        else:
            phases = np.array(phase_index, dtype=np.int64)
        n_g = np.zeros(S, dtype=np.int64)
        n_e = np.zeros(S, dtype=np.int64)
        resonant = []
        for s, sample in enumerate(samples):
            ks = {d.phase_index for d in sample.detections}
            if len(ks) > 1:
                raise ValueError(f"sample {s} mixes Ramsey phases {sorted(ks)}")
            if ks:
                phases[s] = ks.pop()
            n_g[s] = sum(d.outcome == "g" for d in sample.detections)
            n_e[s] = sum(d.outcome == "e" for d in sample.detections)
            if sample.resonant_injection:
                resonant.append(s)
        return cls(params, phases, n_g, n_e, tuple(resonant), **kwargs)

    def without_truth(self) -> "DetectionRecord":
        return DetectionRecord(
            self.params, self.phase_index, self.n_g, self.n_e, self.resonant_samples,
            None, self.seed, dict(self.meta),
        )

    def __eq__(self, other):
        if not isinstance(other, DetectionRecord):
            return NotImplemented
        return (
            self.params == other.params
            and np.array_equal(self.phase_index, other.phase_index)
            and np.array_equal(self.n_g, other.n_g)
            and np.array_equal(self.n_e, other.n_e)
            and self.resonant_samples == other.resonant_samples
            and self.truth == other.truth
            and self.seed == other.seed
            and self.meta == other.meta
        )
