"""Typed lookdown population on n particles and its empirical measure.

Individuals 1..n carry the type of their ancestor at time 0; the extra
individual 0 is the generic immigrant with the reserved type 0.  The
type of individual k at time t is U[a(k)] where a is the block-index map
of the forward partition state.  The measure-valued process is realized
through the empirical measure of this type vector: untouched particles
keep i.i.d. background types, so the background component of the mixture
is represented automatically, with O(1/n) bias on p-th moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .functionals import DiscreteLaw, MomentFunctional
from .measures import CoagulationMeasure, EventSampler, REJECTION_CAP, SamplingCapError
from .partitions import DistinguishedPartition, canonical_labels_np
from .flows import EventLog, forward_state

__all__ = [
    "TypeAssignment",
    "EmpiricalMeasure",
    "InitialLaw",
    "assign_types",
    "types_at",
    "empirical_moment",
    "empirical_block_moment",
    "forward_ancestor_map",
    "simulate_type_vector",
    "block_frequencies",
    "TypeMixture",
    "predicted_type_mixture",
    "ks_distance",
]

InitialLaw = Union[DiscreteLaw, str]  # "uniform" or "distinct" by name


@dataclass(frozen=True)
class TypeAssignment:
    """Types U[0..n] with U[0] = 0 reserved for the immigrant."""

    values: tuple[float, ...]

    def __post_init__(self):
        if not self.values or self.values[0] != 0.0:
            raise ValueError("U[0] must be the immigrant type 0")
        if any(not 0.0 < u <= 1.0 for u in self.values[1:]):
            raise ValueError("individual types must lie in (0,1]")

    @property
    def n(self) -> int:
        return len(self.values) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values)


def assign_types(n: int, law: InitialLaw, rng: np.random.Generator) -> TypeAssignment:
    """Draw U[1..n] per the initial law; U[0] is always 0.

    ``law`` is a :class:`DiscreteLaw`, the string ``"uniform"`` for
    i.i.d. uniform(0,1] types, or ``"distinct"`` for the deterministic
    labels i/(n+1) that make lineages readable from types.
    """
    if isinstance(law, DiscreteLaw):
        tail = law.sample(n, rng)
    elif law == "uniform":
        tail = 1.0 - rng.random(n)  # (0, 1]
    elif law == "distinct":
        tail = np.arange(1, n + 1) / (n + 1)
    else:
        raise ValueError(f"unknown initial law {law!r}")
    return TypeAssignment((0.0, *map(float, tail)))


def types_at(log: EventLog, types: TypeAssignment, t: float) -> np.ndarray:
    """Type vector v[k] = U[a(k)] of individuals 1..n at time t."""
    if types.n != log.n:
        raise ValueError("type assignment and log disagree on n")
    state = forward_state(log, t)
    a = np.fromiter(state.assignment, dtype=np.int64)
    return types.as_array()[a[1:]]


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted atoms summing to one (values may include the type 0)."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.weights):
            raise ValueError("values and weights must align")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("negative weight")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @classmethod
    def from_sample(cls, sample: np.ndarray) -> "EmpiricalMeasure":
        vals, counts = np.unique(np.asarray(sample), return_counts=True)
        weights = counts / counts.sum()
        return cls(tuple(float(v) for v in vals), tuple(float(w) for w in weights))

    def expect(self, g) -> float:
        vals = np.asarray(self.values)
        return float(np.dot(np.asarray(self.weights), g(vals)))

    def expect_product(self, factors) -> float:
        vals = np.asarray(self.values)
        acc = np.asarray(self.weights).copy()
        for g in factors:
            acc = acc * g(vals)
        return float(acc.sum())


def empirical_moment(
    v: np.ndarray,
    f: MomentFunctional,
    rng: np.random.Generator | None = None,
    samples: int | None = None,
) -> float:
    """Estimate the p-fold moment of f under the empirical measure of v.

    With ``samples=None`` the p-fold sum over the empirical atoms is
    evaluated exactly (product form makes it linear in the atom count);
    otherwise f is averaged over ``samples`` p-tuples drawn with
    replacement from v.
    """
    if f.arity > len(v):
        raise ValueError("functional arity exceeds the particle count")
    if samples is None:
        emp = EmpiricalMeasure.from_sample(v)
        out = 1.0
        for g in f.factors:
            out *= emp.expect(g)
        return float(out)
    if rng is None:
        raise ValueError("Monte Carlo moment needs an rng")
    idx = rng.integers(0, len(v), size=(samples, f.arity))
    acc = np.ones(samples)
    for i, g in enumerate(f.factors):
        acc *= g(np.asarray(v)[idx[:, i]])
    return float(acc.mean())


def empirical_block_moment(
    v: np.ndarray,
    pi: DistinguishedPartition,
    f: MomentFunctional,
    rng: np.random.Generator | None = None,
    samples: int | None = None,
) -> float:
    """Estimate phi(empirical measure of v, pi) with the coordinate 0 fixed at 0.

    The exact path averages f over tuples (x_{a(1)},...,x_{a(p)}) with
    block values drawn i.i.d. from the empirical measure and x_0 = 0; it
    is the inner expectation of the sampling estimator, evaluated in
    closed form.  Pass ``samples`` to use the sampling estimator instead.
    """
    from .exact import phi_functional  # local import keeps layering acyclic

    if samples is None:
        return phi_functional(EmpiricalMeasure.from_sample(v), pi, f)
    if rng is None:
        raise ValueError("Monte Carlo moment needs an rng")
    p = f.arity
    blocks = pi.num_blocks
    draws = np.asarray(v)[rng.integers(0, len(v), size=(samples, blocks))]
    draws[:, 0] = 0.0
    acc = np.ones(samples)
    for i, g in enumerate(f.factors):
        acc *= g(draws[:, pi.assignment[i + 1]])
    return float(acc.mean())


def forward_ancestor_map(
    measure: CoagulationMeasure,
    n: int,
    t: float,
    rng: np.random.Generator,
    sampler: EventSampler | None = None,
) -> np.ndarray:
    """Block-index map of the forward state at time t, as an int array.

    Equivalent in law to ``forward_state(simulate_events(...), t)`` read
    through ``alpha``, but composes the per-event ancestor maps directly
    (new event innermost), never materializing partitions.  This is the
    hot path for particle-system moments at large n.
    """
    if sampler is None:
        sampler = EventSampler(measure, n)
    if sampler.total <= 0.0 or t == 0.0:
        return np.arange(n + 1)
    atom_cums = [
        (np.cumsum(np.array([max(s.s0, 0.0), *s.masses()])), len(s.masses()) + 1)
        for _, s in measure.atoms
    ]
    # The state at a fixed time needs only the Poisson event count and the
    # i.i.d. marks, so draw everything shared up front and fold in order.
    num_events = int(rng.poisson(sampler.total * t))
    cats = np.searchsorted(sampler.cum, rng.random(num_events) * sampler.total, side="right")
    cats = cats.clip(0, len(sampler.cum) - 1)
    aux = rng.random(num_events)
    labels = sampler.labels
    work = np.arange(n + 1)
    spare = np.empty(n + 1, dtype=work.dtype)
    for k in range(num_events):
        label = labels[cats[k]]
        if label == "kingman0":
            i = 1 + int(aux[k] * n)
            spare[:i] = work[:i]
            spare[i] = work[0]
            spare[i + 1 :] = work[i:n]
            work, spare = spare, work
        elif label == "kingman1":
            i, j = np.sort(rng.choice(np.arange(1, n + 1), size=2, replace=False))
            spare[:j] = work[:j]
            spare[j] = work[i]
            spare[j + 1 :] = work[j:n]
            work, spare = spare, work
        else:
            cum, dust_code = atom_cums[cats[k] - 2]
            for _ in range(REJECTION_CAP):
                colour = np.searchsorted(cum, rng.random(n), side="right")
                key = np.empty(n + 1, dtype=np.int64)
                key[0] = 0
                key[1:] = colour
                dust = colour == dust_code
                key[1:][dust] = dust_code + 1 + np.nonzero(dust)[0]
                ev = canonical_labels_np(key)
                # singletons iff the last label is n (all n+1 labels distinct)
                if ev[-1] != n:
                    break
            else:
                raise SamplingCapError("paint-box rejection exceeded the cap")
            work = work[ev]
            spare = np.empty(n + 1, dtype=work.dtype)
    return work


def simulate_type_vector(
    measure: CoagulationMeasure,
    n: int,
    t: float,
    law: InitialLaw,
    rng: np.random.Generator,
    sampler: EventSampler | None = None,
) -> np.ndarray:
    """Type vector of individuals 1..n at time t, fresh types and events."""
    comp = forward_ancestor_map(measure, n, t, rng, sampler=sampler)
    types = assign_types(n, law, rng)
    return types.as_array()[comp[1:]]


def block_frequencies(pi: DistinguishedPartition) -> np.ndarray:
    """Per-block frequencies #(block ∩ {1..n})/n, summing to one."""
    counts = np.bincount(pi.assignment[1:], minlength=pi.num_blocks)
    return counts / pi.n


@dataclass(frozen=True)
class TypeMixture:
    """Mixture of type atoms plus a diffuse background component."""

    atom_values: tuple[float, ...]
    atom_weights: tuple[float, ...]
    background_weight: float
    background: InitialLaw  # "uniform" or a DiscreteLaw

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for v, w in zip(self.atom_values, self.atom_weights):
            out = out + w * (x >= v)
        if self.background_weight > 0.0:
            if isinstance(self.background, DiscreteLaw):
                bg = np.zeros_like(x)
                for v, w in zip(self.background.values, self.background.weights):
                    bg = bg + w * (x >= v)
            else:
                bg = np.clip(x, 0.0, 1.0)
            out = out + self.background_weight * bg
        return out

    def jump_points(self) -> np.ndarray:
        pts = list(self.atom_values)
        if isinstance(self.background, DiscreteLaw):
            pts.extend(self.background.values)
        return np.unique(np.asarray(pts, dtype=float))


def predicted_type_mixture(
    pi: DistinguishedPartition, types: TypeAssignment, background: InitialLaw
) -> TypeMixture:
    """de Finetti-style mixture predicted from one realization.

    Blocks observed with at least two individuals contribute atoms at
    their types with their observed frequencies; the distinguished block
    contributes an atom at 0; blocks that look like dust at this
    resolution (singletons among 1..n) contribute background mass.
    """
    counts = np.bincount(pi.assignment[1:], minlength=pi.num_blocks)
    freq = counts / pi.n
    U = types.values
    atom_values = [0.0]
    atom_weights = [float(freq[0])]
    dust_weight = 0.0
    for b in range(1, pi.num_blocks):
        if counts[b] >= 2:
            atom_values.append(U[b])
            atom_weights.append(float(freq[b]))
        else:
            dust_weight += float(freq[b])
    return TypeMixture(tuple(atom_values), tuple(atom_weights), dust_weight, background)


def ks_distance(sample: np.ndarray, mixture: TypeMixture) -> float:
    """sup |empirical cdf - mixture cdf|, handling atoms on both sides."""
    sample = np.sort(np.asarray(sample, dtype=float))
    n = sample.size
    grid = np.unique(np.concatenate([sample, mixture.jump_points()]))
    emp_right = np.searchsorted(sample, grid, side="right") / n
    emp_left = np.searchsorted(sample, grid, side="left") / n
    model_right = mixture.cdf(grid)
    eps = 1e-12
    model_left = mixture.cdf(grid - eps)
    return float(
        np.max(np.maximum(np.abs(emp_right - model_right), np.abs(emp_left - model_left)))
    )
