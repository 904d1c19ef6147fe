"""Coagulation measures (c0, c1, atomic nu) and their event rates.

A coagulation measure drives the merge/immigration dynamics.  It splits
into a distinguished Kingman part (rate c0 per pair {0,i}), a binary
Kingman part (rate c1 per pair {i,j}, 1 <= i < j) and an atomic
multiple-collisions part: a finite list of weighted mass partitions, each
contributing its paint-box law.  Restricted to {0,...,n} every non-trivial
event has a finite rate, which keeps the event-driven simulation exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .partitions import (
    DistinguishedPartition,
    MassPartition,
    kingman,
    paintbox_prob,
    paintbox_sample,
    singletons,
)

__all__ = ["CoagulationMeasure", "EventSampler", "ValidationReport", "SamplingCapError"]

REJECTION_CAP = 10 ** 6


class SamplingCapError(RuntimeError):
    """Rejection sampling exceeded the trial cap (acceptance too small)."""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    integral: float

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class CoagulationMeasure:
    """Triplet (c0, c1, atoms) with atoms = ((weight, MassPartition), ...)."""

    c0: float
    c1: float
    atoms: tuple[tuple[float, MassPartition], ...] = ()

    @classmethod
    def kingman(cls, c0: float, c1: float) -> "CoagulationMeasure":
        return cls(c0, c1, ())

    def validate(self) -> ValidationReport:
        """Collect structural violations; never raises.

        Also reports the integrability value sum_k w_k (s0 + sum_i s_i^2),
        which is automatically finite for finite atom lists.
        """
        problems = []
        if self.c0 < 0.0:
            problems.append("c0 is negative")
        if self.c1 < 0.0:
            problems.append("c1 is negative")
        integral = 0.0
        for idx, (w, s) in enumerate(self.atoms):
            if w <= 0.0:
                problems.append(f"atom {idx}: weight must be positive")
            for msg in s.check():
                problems.append(f"atom {idx}: {msg}")
            if s.is_trivial:
                problems.append(f"atom {idx}: trivial atom charges the singleton partition")
            integral += w * (max(s.s0, 0.0) + sum(x * x for x in s.s))
        return ValidationReport(tuple(problems), integral)

    def jump_rate(self, pi: DistinguishedPartition) -> float:
        """Rate q of the restricted event ``pi`` (pi != singletons)."""
        if pi.is_singletons:
            raise ValueError("jump_rate: the singleton partition is the null event")
        rate = 0.0
        pair = pi.doubleton()
        if pair is not None:
            rate += self.c0 if pair[0] == 0 else self.c1
        for w, s in self.atoms:
            rate += w * paintbox_prob(s, pi)
        return rate

    def singleton_prob(self, s: MassPartition, n: int) -> float:
        """Paint-box probability of the trivial restriction to {0,...,n}."""
        return paintbox_prob(s, singletons(n))

    def event_categories(self, n: int) -> tuple[list[str], np.ndarray]:
        """Labels and rates of the event categories at resolution n.

        Fixed order (Kingman-0, Kingman-1, atoms in list order) so that
        sampling is deterministic given the generator state.
        """
        labels = ["kingman0", "kingman1"]
        weights = [self.c0 * n, self.c1 * n * (n - 1) / 2.0]
        for idx, (w, s) in enumerate(self.atoms):
            labels.append(f"atom{idx}")
            weights.append(w * (1.0 - self.singleton_prob(s, n)))
        return labels, np.asarray(weights)

    def total_rate(self, n: int) -> float:
        """Rate of events whose restriction to {0,...,n} is non-trivial."""
        if n < 0:
            raise ValueError("n must be >= 0")
        _, weights = self.event_categories(n)
        return float(weights.sum())

    def sample_mark(self, n: int, rng: np.random.Generator) -> DistinguishedPartition:
        """Draw a non-trivial event partition with law q_pi / total_rate."""
        return EventSampler(self, n).next_mark(rng)

    def sample_event(
        self, n: int, rng: np.random.Generator
    ) -> tuple[float, DistinguishedPartition]:
        """Waiting time ~ Exponential(total_rate) and the event partition."""
        return EventSampler(self, n).next_event(rng)


class EventSampler:
    """Category table for repeated event draws at a fixed resolution.

    Precomputes the per-category rates once so that long simulation loops
    avoid re-evaluating paint-box singleton probabilities at every event.
    """

    def __init__(self, measure: CoagulationMeasure, n: int):
        self.measure = measure
        self.n = n
        self.labels, self.weights = measure.event_categories(n)
        self.cum = np.cumsum(self.weights)
        self.total = float(self.cum[-1]) if len(self.cum) else 0.0

    def next_category(self, rng: np.random.Generator) -> int:
        u = rng.random() * self.total
        return int(np.searchsorted(self.cum, u, side="right").clip(0, len(self.cum) - 1))

    def next_mark(self, rng: np.random.Generator) -> DistinguishedPartition:
        if self.total <= 0.0:
            raise ValueError("no events at this resolution")
        n = self.n
        cat = self.next_category(rng)
        if self.labels[cat] == "kingman0":
            return kingman(n, 0, int(rng.integers(1, n + 1)))
        if self.labels[cat] == "kingman1":
            i, j = np.sort(rng.choice(np.arange(1, n + 1), size=2, replace=False))
            return kingman(n, int(i), int(j))
        _, s = self.measure.atoms[cat - 2]
        for _ in range(REJECTION_CAP):
            pi = paintbox_sample(s, n, rng)
            if not pi.is_singletons:
                return pi
        raise SamplingCapError(
            f"paint-box rejection exceeded {REJECTION_CAP} trials at resolution {n}"
        )

    def next_event(self, rng: np.random.Generator) -> tuple[float, DistinguishedPartition]:
        if self.total <= 0.0:
            raise ValueError("no events at this resolution")
        dt = rng.exponential(1.0 / self.total)
        return dt, self.next_mark(rng)

    def next_block_count(self, rng: np.random.Generator) -> int:
        """Block count of the next mark, without building the partition.

        Used by the lumped block-count chain: a Kingman event on {0,...,n}
        leaves n blocks; a paint-box event leaves 1 + (distinct colours)
        + (dust count) blocks.
        """
        n = self.n
        cat = self.next_category(rng)
        if self.labels[cat] in ("kingman0", "kingman1"):
            return n
        _, s = self.measure.atoms[cat - 2]
        masses = s.masses()
        dust_code = len(masses) + 1
        cum = np.cumsum(np.array([max(s.s0, 0.0), *masses]))
        for _ in range(REJECTION_CAP):
            colour = np.searchsorted(cum, rng.random(n), side="right")
            if n + 1 == (blocks := self._blocks_from_colours(colour, dust_code)):
                continue
            return blocks
        raise SamplingCapError(
            f"paint-box rejection exceeded {REJECTION_CAP} trials at resolution {n}"
        )

    @staticmethod
    def _blocks_from_colours(colour: np.ndarray, dust_code: int) -> int:
        dust = int((colour == dust_code).sum())
        real = np.unique(colour[(colour > 0) & (colour < dust_code)])
        return 1 + len(real) + dust
