"""Product-form test functions on [0,1]^p and atomic laws on (0,1].

Moment computations throughout the package integrate functions of the
form f(x_1,...,x_p) = g_1(x_1)...g_p(x_p) against products of atomic
measures.  Restricting to products of univariate polynomials and atom
indicators keeps every integral a finite sum while the linear span of
such products is dense among continuous functions, so nothing is lost
for moment checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = ["PolyFactor", "IndicatorFactor", "MomentFunctional", "DiscreteLaw"]


@dataclass(frozen=True)
class PolyFactor:
    """Univariate polynomial with ascending coefficients."""

    coeffs: tuple[float, ...]

    def __call__(self, x):
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc


@dataclass(frozen=True)
class IndicatorFactor:
    """Indicator of a finite set of atoms."""

    atoms: tuple[float, ...]

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            return np.isin(x, self.atoms).astype(float)
        return 1.0 if x in self.atoms else 0.0


Factor = Union[PolyFactor, IndicatorFactor]


@dataclass(frozen=True)
class MomentFunctional:
    """f(x_1,...,x_p) = prod_i factor_i(x_i), bounded on [0,1]^p."""

    factors: tuple[Factor, ...]

    @property
    def arity(self) -> int:
        return len(self.factors)

    def __call__(self, x) -> float:
        out = 1.0
        for g, xi in zip(self.factors, x):
            out *= g(xi)
        return float(out)

    @classmethod
    def constant_one(cls, p: int) -> "MomentFunctional":
        return cls(tuple(PolyFactor((1.0,)) for _ in range(p)))

    @classmethod
    def monomial(cls, exponents: tuple[int, ...]) -> "MomentFunctional":
        """prod_i x_i^{e_i}."""
        factors = []
        for e in exponents:
            factors.append(PolyFactor(tuple([0.0] * e + [1.0])))
        return cls(tuple(factors))


@dataclass(frozen=True)
class DiscreteLaw:
    """Atomic probability law on (0,1] (the type 0 is reserved)."""

    values: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.weights) or not self.values:
            raise ValueError("values and weights must be non-empty and aligned")
        if any(not 0.0 < v <= 1.0 for v in self.values):
            raise ValueError("atoms must lie in (0,1]; 0 is the reserved immigrant type")
        if any(w < 0.0 for w in self.weights):
            raise ValueError("negative weight")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, expected 1")

    @classmethod
    def point(cls, value: float) -> "DiscreteLaw":
        return cls((value,), (1.0,))

    def expect(self, g: Callable[[float], float]) -> float:
        return math.fsum(w * g(v) for v, w in zip(self.values, self.weights))

    def expect_product(self, factors) -> float:
        """E[prod g(V)] for a single draw V shared by all the factors."""
        total = 0.0
        for v, w in zip(self.values, self.weights):
            acc = w
            for g in factors:
                acc *= g(v)
            total += acc
        return total

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.choice(len(self.values), size=size, p=np.asarray(self.weights))
        return np.asarray(self.values)[idx]
