"""Exact small-resolution computations: rate matrices, semigroups, moments.

At a fixed resolution p the restricted coalescent is a finite-state CTMC
over all partitions of {0,...,p}.  This module enumerates that space,
assembles the jump-rate matrix, exponentiates it by uniformization (with
a certified truncation tolerance) and evaluates the moment functionals
that pair the measure-valued process with the coalescent: for an atomic
law rho and a product-form f,

    phi(rho, pi) = E[f(x_{a(1)},...,x_{a(p)})],  x_0 = 0, x_j iid rho,

with a the block-index map of pi.  The generator of the measure-valued
process is computed along two independent routes (the partition-rate sum
and the decomposed c0/c1/nu form) so they can certify each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .functionals import DiscreteLaw, MomentFunctional
from .measures import CoagulationMeasure
from .partitions import DistinguishedPartition, all_partitions, coag, singletons

__all__ = [
    "ResourceCapError",
    "PartitionSpace",
    "RateMatrix",
    "enumerate_space",
    "rate_matrix",
    "transition_probs",
    "phi_functional",
    "exact_dual_expectation",
    "generator_eq1",
    "generator_decomposed",
]

MAX_RESOLUTION = 6  # Bell(7) = 877 states


class ResourceCapError(RuntimeError):
    """An exact computation would exceed the configured resource cap."""


@dataclass(frozen=True, eq=False)
class PartitionSpace:
    """All partitions of {0,...,p}, with an index for matrix assembly."""

    p: int
    parts: tuple[DistinguishedPartition, ...]
    index: dict

    def __len__(self) -> int:
        return len(self.parts)

    @property
    def singletons_index(self) -> int:
        return self.index[singletons(self.p)]


def enumerate_space(p: int, cap: int = MAX_RESOLUTION) -> PartitionSpace:
    if p < 0:
        raise ValueError("p must be >= 0")
    if p > cap:
        raise ResourceCapError(f"resolution {p} exceeds the cap {cap} (Bell growth)")
    parts = tuple(all_partitions(p))
    index = {pi: k for k, pi in enumerate(parts)}
    return PartitionSpace(p, parts, index)


@dataclass(frozen=True, eq=False)
class RateMatrix:
    """Generator of the restricted chain: Q[i,j] = sum of event rates taking i to j."""

    space: PartitionSpace
    Q: np.ndarray


def rate_matrix(measure: CoagulationMeasure, space: PartitionSpace) -> RateMatrix:
    size = len(space)
    Q = np.zeros((size, size))
    events = []
    for pi in space.parts:
        if pi.is_singletons:
            continue
        q = measure.jump_rate(pi)
        if q > 0.0:
            events.append((pi, q))
    for i, state in enumerate(space.parts):
        for ev, q in events:
            target = space.index[coag(state, ev)]
            if target != i:
                Q[i, target] += q
    np.fill_diagonal(Q, Q.diagonal() - Q.sum(axis=1))
    return RateMatrix(space, Q)


def transition_probs(rates: RateMatrix | np.ndarray, t: float, tol: float = 1e-10) -> np.ndarray:
    """e^{tQ} by uniformization, entrywise truncation error below ``tol``.

    The Poisson tail beyond the truncation point bounds the error of every
    entry because the powers of the uniformized kernel are stochastic.
    Large rate*time products are halved and squared to keep the Poisson
    weights representable.
    """
    Q = rates.Q if isinstance(rates, RateMatrix) else np.asarray(rates)
    if t < 0.0:
        raise ValueError("t must be >= 0")
    size = Q.shape[0]
    ident = np.eye(size)
    lam = float(np.max(-np.diag(Q)))
    if t == 0.0 or lam <= 0.0:
        return ident.copy()
    mu = lam * t
    if mu > 200.0:
        half = transition_probs(Q, t / 2.0, tol=tol / 4.0)
        return half @ half
    kernel = ident + Q / lam
    weight = math.exp(-mu)
    acc = weight * ident
    power = ident
    cum = weight
    k = 0
    while 1.0 - cum > tol:
        k += 1
        power = power @ kernel
        weight *= mu / k
        acc = acc + weight * power
        cum += weight
    return acc


def phi_functional(rho, pi: DistinguishedPartition, f: MomentFunctional) -> float:
    """Moment of f under independent block values: x_0 = 0, blocks iid rho.

    Product form factorizes across blocks, so the cost is linear in the
    number of atoms of rho.  ``rho`` may be any atomic law exposing
    ``expect_product`` (a fitted empirical measure works too).
    """
    p = f.arity
    if p != pi.n:
        raise ValueError(f"functional arity {p} does not match partition on [{pi.n}]")
    groups: dict[int, list] = {}
    for i in range(1, p + 1):
        groups.setdefault(pi.assignment[i], []).append(f.factors[i - 1])
    val = 1.0
    for b, factors in groups.items():
        if b == 0:
            for g in factors:
                val *= g(0.0)
        else:
            val *= rho.expect_product(factors)
    return float(val)


def exact_dual_expectation(
    measure: CoagulationMeasure,
    pi: DistinguishedPartition,
    rho,
    f: MomentFunctional,
    t: float,
    rates: RateMatrix | None = None,
) -> float:
    """E[phi(rho, restricted chain at t)] started from ``pi``."""
    if rates is None:
        rates = rate_matrix(measure, enumerate_space(pi.n))
    space = rates.space
    probs = transition_probs(rates, t)[space.index[pi]]
    values = np.array([phi_functional(rho, state, f) for state in space.parts])
    return float(probs @ values)


def generator_eq1(
    measure: CoagulationMeasure,
    rho,
    f: MomentFunctional,
    space: PartitionSpace | None = None,
) -> float:
    """Generator of the moment functional via the partition-rate sum."""
    p = f.arity
    if space is None:
        space = enumerate_space(p)
    base = phi_functional(rho, singletons(p), f)
    acc = 0.0
    for pi in space.parts:
        if pi.is_singletons:
            continue
        q = measure.jump_rate(pi)
        if q != 0.0:
            acc += q * (phi_functional(rho, pi, f) - base)
    return acc


def _mean_with_reweighted_atoms(
    s, rho: DiscreteLaw, f: MomentFunctional, max_terms: int
) -> float:
    """E[G_f(dust*rho + s0*delta_0 + sum_l s_l*delta_{V_l})], V_l iid rho.

    Enumerates the assignment of each coordinate to a component: the
    background (dust*rho + s0*delta_0 integrates directly) or one of the
    reweighted atoms, whose shared draws force joint expectations.
    """
    gs = f.factors
    p = f.arity
    masses = s.masses()
    m = len(masses)
    cost = ((m + 2) * max(1, len(rho.values))) ** p
    if cost > max_terms:
        raise ResourceCapError(
            f"decomposed generator term needs ~{cost} evaluations (cap {max_terms})"
        )
    dust = s.dust
    base = [dust * rho.expect(g) + s.s0 * g(0.0) for g in gs]
    total = 0.0
    for assign in itertools.product(range(m + 1), repeat=p):
        term = 1.0
        for i, a in enumerate(assign):
            if a == 0:
                term *= base[i]
        if term == 0.0:
            continue
        for colour in range(1, m + 1):
            group = [gs[i] for i, a in enumerate(assign) if a == colour]
            if group:
                term *= masses[colour - 1] ** len(group) * rho.expect_product(group)
        total += term
    return total


def generator_decomposed(
    measure: CoagulationMeasure,
    rho: DiscreteLaw,
    f: MomentFunctional,
    max_terms: int = 10 ** 7,
) -> float:
    """Generator via the explicit c0/c1/nu decomposition.

    The c0 part sets one coordinate to 0, the c1 part copies coordinate i
    onto coordinate j, and each atom replaces the sampling law by its
    reweighted mixture.  Must agree with :func:`generator_eq1` up to
    roundoff; the two routes are computed independently.
    """
    gs = f.factors
    p = f.arity
    means = [rho.expect(g) for g in gs]
    at_zero = [g(0.0) for g in gs]
    prod_all = math.prod(means)

    def prod_except(skip: set[int]) -> float:
        out = 1.0
        for k, v in enumerate(means):
            if k not in skip:
                out *= v
        return out

    part_c0 = 0.0
    for i in range(p):
        part_c0 += (at_zero[i] - means[i]) * prod_except({i})
    part_c0 *= measure.c0

    part_c1 = 0.0
    for i in range(p):
        for j in range(i + 1, p):
            joint = rho.expect_product([gs[i], gs[j]])
            part_c1 += joint * prod_except({i, j}) - prod_all
    part_c1 *= measure.c1

    part_nu = 0.0
    for w, s in measure.atoms:
        part_nu += w * (_mean_with_reweighted_atoms(s, rho, f, max_terms) - prod_all)

    return part_c0 + part_c1 + part_nu
