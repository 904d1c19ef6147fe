"""Distinguished partitions of {0,...,n} and the coagulation algebra.

A distinguished partition carves {0,...,n} into blocks, with the block
containing 0 singled out (it collects immigrant descendants).  Blocks are
kept in canonical order: sorted by least element, so block 0 always holds
the element 0.  Internally a partition is an assignment array ``a`` with
``a[k]`` the block index of element ``k``; canonical order makes ``a`` a
restricted-growth string (``a[0] = 0`` and ``a[k] <= max(a[:k]) + 1``).

The module also provides s-distinguished paint-boxes: random partitions
obtained by colouring elements independently with masses
``(s0; s1 >= s2 >= ...)`` plus dust, where colour 0 merges into the block
of the element 0 and dust elements stay singletons.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "DistinguishedPartition",
    "MassPartition",
    "singletons",
    "coag",
    "restrict",
    "alpha",
    "distance",
    "kingman",
    "paintbox_sample",
    "paintbox_prob",
    "paintbox_prob_bruteforce",
    "paintbox_distribution_bruteforce",
    "all_partitions",
    "canonical_labels",
    "canonical_labels_np",
]


def canonical_labels(labels: Iterable) -> tuple[int, ...]:
    """Relabel arbitrary block labels by order of first appearance."""
    seen: dict = {}
    out = []
    for lab in labels:
        idx = seen.get(lab)
        if idx is None:
            idx = len(seen)
            seen[lab] = idx
        out.append(idx)
    return tuple(out)


def canonical_labels_np(labels: np.ndarray) -> np.ndarray:
    """Vectorized first-appearance relabelling (for large ground sets)."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse]


@dataclass(frozen=True)
class DistinguishedPartition:
    """A partition of {0,...,n} in canonical (least-element) block order.

    The constructor accepts any assignment of block labels to elements
    0..n and canonicalizes it, so equality and hashing are structural.
    """

    assignment: tuple[int, ...]

    def __post_init__(self):
        if len(self.assignment) == 0:
            raise ValueError("partition needs at least the element 0")
        object.__setattr__(self, "assignment", canonical_labels(self.assignment))

    @property
    def n(self) -> int:
        """Ground-set bound: the partition lives on {0,...,n}."""
        return len(self.assignment) - 1

    @property
    def num_blocks(self) -> int:
        return max(self.assignment) + 1

    @property
    def is_singletons(self) -> bool:
        return self.num_blocks == len(self.assignment)

    @property
    def is_single_block(self) -> bool:
        return self.num_blocks == 1

    def blocks(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.num_blocks)]
        for k, b in enumerate(self.assignment):
            out[b].append(k)
        return tuple(tuple(b) for b in out)

    def block_sizes(self) -> tuple[int, ...]:
        sizes = [0] * self.num_blocks
        for b in self.assignment:
            sizes[b] += 1
        return tuple(sizes)

    def doubleton(self) -> tuple[int, int] | None:
        """The merged pair (i, j) if this is a simple doubleton partition."""
        if self.num_blocks != len(self.assignment) - 1:
            return None
        sizes = self.block_sizes()
        pair = [k for k, b in enumerate(self.assignment) if sizes[b] == 2]
        return (pair[0], pair[1])

    def __str__(self) -> str:
        return "|".join(" ".join(str(k) for k in b) for b in self.blocks())


def singletons(n: int) -> DistinguishedPartition:
    """The partition of {0,...,n} into singletons (neutral for coag)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return DistinguishedPartition(tuple(range(n + 1)))


def coag(pi: DistinguishedPartition, pi2: DistinguishedPartition) -> DistinguishedPartition:
    """Coagulate the blocks of ``pi`` according to ``pi2``.

    Block i of the result is the union of the blocks of ``pi`` whose
    indices lie in block i of ``pi2``; empty unions are dropped.  ``pi2``
    must cover the block indices {0,...,B-1} of ``pi``; its elements
    beyond B-1 are ignored.  For canonical inputs the composed assignment
    is already canonical.
    """
    if pi2.n + 1 < pi.num_blocks:
        raise ValueError(
            f"coag: second partition covers only [{pi2.n}] but first has "
            f"{pi.num_blocks} blocks"
        )
    a2 = pi2.assignment
    return DistinguishedPartition(tuple(a2[j] for j in pi.assignment))


def restrict(pi: DistinguishedPartition, m: int) -> DistinguishedPartition:
    """Intersect all blocks with {0,...,m} and drop the empties."""
    if not 0 <= m <= pi.n:
        raise ValueError(f"restrict: need 0 <= m <= {pi.n}, got {m}")
    return DistinguishedPartition(pi.assignment[: m + 1])


def alpha(pi: DistinguishedPartition, k: int) -> int:
    """Index of the block containing ``k`` (the ancestor map)."""
    return pi.assignment[k]


def distance(pi: DistinguishedPartition, pi2: DistinguishedPartition) -> float:
    """Ultrametric 1/(1 + largest m with equal restrictions to {0,...,m}).

    On full equality the finite truncation returns 1/(1+n) rather than 0.
    """
    if pi.n != pi2.n:
        raise ValueError("distance: partitions must share the ground bound")
    m = 0
    for k in range(1, pi.n + 1):
        if pi.assignment[k] != pi2.assignment[k]:
            break
        m = k
    return 1.0 / (1.0 + m)


def kingman(n: int, i: int, j: int) -> DistinguishedPartition:
    """The simple partition of {0,...,n} whose only non-singleton block is {i,j}."""
    if not 0 <= i < j <= n:
        raise ValueError(f"kingman: need 0 <= i < j <= {n}, got ({i}, {j})")
    labels = list(range(n + 1))
    labels[j] = i
    return DistinguishedPartition(tuple(labels))


@dataclass(frozen=True)
class MassPartition:
    """Element (s0; s1 >= s2 >= ... >= 0) of the ranked-mass simplex.

    ``s0`` is the mass of the distinguished colour, ``s`` the ranked
    reproduction masses, and the dust is whatever is left to 1.  The
    constructor stores values as given; use :meth:`check` for structural
    violations so that measure validation can report rather than abort.
    """

    s0: float
    s: tuple[float, ...] = ()

    @property
    def dust(self) -> float:
        return 1.0 - self.s0 - sum(self.s)

    @property
    def is_trivial(self) -> bool:
        """True when the paint-box charges only the singleton partition."""
        return self.s0 <= 0.0 and (len(self.s) == 0 or self.s[0] <= 0.0)

    def check(self) -> list[str]:
        """List structural violations (empty list means valid)."""
        problems = []
        if self.s0 < 0.0 or any(x < 0.0 for x in self.s):
            problems.append("negative mass entry")
        if any(a < b for a, b in zip(self.s, self.s[1:])):
            problems.append("reproduction masses not sorted descending")
        if self.s0 + sum(self.s) > 1.0 + 1e-12:
            problems.append("masses sum beyond 1")
        return problems

    def masses(self) -> tuple[float, ...]:
        """Strictly positive reproduction masses (zero colours dropped)."""
        return tuple(x for x in self.s if x > 0.0)


def paintbox_sample(
    s: MassPartition, n: int, rng: np.random.Generator
) -> DistinguishedPartition:
    """Draw an s-distinguished paint-box restricted to {0,...,n}.

    Elements 1..n independently take colour 0 with probability s0, colour
    j with probability s_j, or dust otherwise; same-coloured elements
    share a block, colour 0 joins the block of element 0, dust elements
    are singletons.
    """
    if n == 0:
        return singletons(0)
    masses = s.masses()
    dust_code = len(masses) + 1
    cum = np.cumsum(np.array([max(s.s0, 0.0), *masses]))
    u = rng.random(n)
    colour = np.searchsorted(cum, u, side="right")  # dust_code == dust
    key = np.empty(n + 1, dtype=np.int64)
    key[0] = 0  # element 0 always sits with colour 0
    key[1:] = colour
    dust_mask = colour == dust_code
    key[1:][dust_mask] = dust_code + 1 + np.nonzero(dust_mask)[0]
    return DistinguishedPartition(tuple(int(x) for x in canonical_labels_np(key)))


def paintbox_prob(s: MassPartition, pi: DistinguishedPartition) -> float:
    """Exact probability that a paint-box restricted to [n] equals ``pi``.

    Computed by recursion over the non-distinguished blocks with a bitmask
    over the colours already used: distinct blocks need distinct colours,
    and singleton blocks may alternatively fall into the dust.
    """
    masses = s.masses()
    m = len(masses)
    if m > 20:
        raise ValueError("paintbox_prob: more than 20 positive colours unsupported")
    sizes = pi.block_sizes()
    k0 = sizes[0] - 1
    head = s.s0 ** k0 if k0 > 0 else 1.0
    if head == 0.0:
        return 0.0
    rest = sizes[1:]
    if not rest:
        return head
    dust = max(s.dust, 0.0)
    dp = {0: 1.0}
    for size in rest:
        ndp: dict[int, float] = {}
        for mask, w in dp.items():
            if size == 1 and dust > 0.0:
                ndp[mask] = ndp.get(mask, 0.0) + w * dust
            for j in range(m):
                if not mask >> j & 1:
                    bit = mask | 1 << j
                    ndp[bit] = ndp.get(bit, 0.0) + w * masses[j] ** size
        dp = ndp
        if not dp:
            return 0.0
    return head * sum(dp.values())


def _partition_from_colours(colours: Sequence[int], dust_code: int) -> DistinguishedPartition:
    # element 0 always carries colour 0
    labels: list = [0]
    for k, c in enumerate(colours):
        labels.append(("dust", k) if c == dust_code else c)
    return DistinguishedPartition(canonical_labels(labels))


def paintbox_distribution_bruteforce(
    s: MassPartition, n: int
) -> dict[DistinguishedPartition, float]:
    """Enumerate all (m+2)^n colourings of 1..n and collect the induced law.

    Brute-force oracle for :func:`paintbox_prob`; only sensible for small
    m and n.
    """
    masses = s.masses()
    m = len(masses)
    probs = [max(s.s0, 0.0), *masses, max(s.dust, 0.0)]
    dust_code = m + 1
    law: dict[DistinguishedPartition, float] = {}
    for colours in itertools.product(range(m + 2), repeat=n):
        p = 1.0
        for c in colours:
            p *= probs[c]
            if p == 0.0:
                break
        if p == 0.0:
            continue
        pi = _partition_from_colours(colours, dust_code)
        law[pi] = law.get(pi, 0.0) + p
    return law


def paintbox_prob_bruteforce(s: MassPartition, pi: DistinguishedPartition) -> float:
    return paintbox_distribution_bruteforce(s, pi.n).get(pi, 0.0)


def all_partitions(n: int) -> Iterator[DistinguishedPartition]:
    """All partitions of {0,...,n} in lexicographic assignment order."""
    def rec(prefix: list[int], mx: int):
        if len(prefix) == n + 1:
            yield DistinguishedPartition(tuple(prefix))
            return
        for v in range(mx + 2):
            prefix.append(v)
            yield from rec(prefix, max(mx, v))
            prefix.pop()

    yield from rec([0], 0)
