"""Shared random-instance generators for the test suite."""

from __future__ import annotations

import numpy as np

from gfvi.functionals import DiscreteLaw, MomentFunctional, PolyFactor
from gfvi.measures import CoagulationMeasure
from gfvi.partitions import DistinguishedPartition, MassPartition


def random_partition(rng: np.random.Generator, n: int) -> DistinguishedPartition:
    labels = rng.integers(0, n + 2, size=n + 1)
    return DistinguishedPartition(tuple(int(x) for x in labels))


def random_mass_partition(
    rng: np.random.Generator, max_colours: int = 3, allow_trivial: bool = False
) -> MassPartition:
    while True:
        k = int(rng.integers(0, max_colours + 1))
        raw = rng.random(k + 1)
        scale = rng.random() / raw.sum()  # random total mass in (0, 1)
        parts = raw * scale
        s0 = float(parts[0])
        s = tuple(float(x) for x in np.sort(parts[1:])[::-1])
        mp = MassPartition(s0, s)
        if allow_trivial or not mp.is_trivial:
            return mp


def random_measure(
    rng: np.random.Generator, max_atoms: int = 3, max_colours: int = 3
) -> CoagulationMeasure:
    c0 = float(rng.random() * 2) if rng.random() < 0.8 else 0.0
    c1 = float(rng.random() * 2) if rng.random() < 0.8 else 0.0
    n_atoms = int(rng.integers(0, max_atoms + 1))
    atoms = tuple(
        (float(rng.random() * 2 + 0.05), random_mass_partition(rng, max_colours))
        for _ in range(n_atoms)
    )
    measure = CoagulationMeasure(c0, c1, atoms)
    if measure.total_rate(1) <= 0.0:
        return CoagulationMeasure(1.0, c1, atoms)
    return measure


def random_discrete_law(rng: np.random.Generator, max_atoms: int = 3) -> DiscreteLaw:
    k = int(rng.integers(1, max_atoms + 1))
    values = tuple(sorted(float(v) for v in rng.random(k) * 0.9 + 0.05))
    w = rng.random(k)
    w = w / w.sum()
    return DiscreteLaw(values, tuple(float(x) for x in w))


def random_functional(rng: np.random.Generator, p: int) -> MomentFunctional:
    factors = tuple(
        PolyFactor(tuple(float(c) for c in rng.random(int(rng.integers(1, 4)))))
        for _ in range(p)
    )
    return MomentFunctional(factors)
