"""Extinction and coming-down-from-infinity diagnostics.

Everything here is driven by three scalar functions of the block count q:

* ``block_decrease_rate(q)`` - the expected instantaneous decrease of the
  non-distinguished block count from a configuration with q blocks,
  c0*q + (c1/2)*q*(q-1) + sum_k w_k*(q*s0 + sum_i (q*s_i - 1 + (1-s_i)^q)).
* ``laplace_exponent(q)`` - same shape with e^{-q s} - 1 + q s replacing
  the binomial term; it is the Laplace exponent of a spectrally positive
  Levy process, so psi(q)/q is concave, and it sandwiches the decrease
  rate within constant factors.
* ``reproduction_exponent(q)`` - the immigration-free part; its tail
  integral is the extinction condition (ii).

Convergence of sum 1/rate(n) implies the coalescent comes down from
infinity; the verdicts here use integral-comparison brackets, rigorous
because the rate is nondecreasing and the atomic tail is sandwiched by
explicit linear/quadratic bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .flows import sample_fixation_time
from .measures import CoagulationMeasure

__all__ = [
    "block_decrease_rate",
    "laplace_exponent",
    "reproduction_exponent",
    "SeriesDiagnostic",
    "IntegralDiagnostic",
    "CDIReport",
    "series_diagnostic",
    "integral_diagnostic",
    "classify",
    "FixationBoundReport",
    "fixation_bound_check",
    "concavity_gap",
    "sandwich_ratios",
    "block_decrease_rate_mc",
]


def _binomial_defect(s: float, q):
    """q*s - 1 + (1-s)^q, computed without cancellation for small s."""
    q = np.asarray(q, dtype=float)
    if s >= 0.5:
        return q * s - 1.0 + np.power(1.0 - s, q)
    return np.expm1(q * math.log1p(-s)) + q * s


def _exponential_defect(s: float, q):
    """e^{-q*s} - 1 + q*s."""
    q = np.asarray(q, dtype=float)
    return np.expm1(-q * s) + q * s


def block_decrease_rate(measure: CoagulationMeasure, q):
    """Expected decrease rate of the block count at configuration size q."""
    q = np.asarray(q, dtype=float)
    val = measure.c0 * q + 0.5 * measure.c1 * q * (q - 1.0)
    for w, s in measure.atoms:
        term = q * max(s.s0, 0.0)
        for si in s.masses():
            term = term + _binomial_defect(si, q)
        val = val + w * term
    return val if val.ndim else float(val)


def laplace_exponent(measure: CoagulationMeasure, q):
    q = np.asarray(q, dtype=float)
    val = measure.c0 * q + 0.5 * measure.c1 * q * q
    for w, s in measure.atoms:
        term = q * max(s.s0, 0.0)
        for si in s.masses():
            term = term + _exponential_defect(si, q)
        val = val + w * term
    return val if val.ndim else float(val)


def reproduction_exponent(measure: CoagulationMeasure, q):
    """The immigration-free part of the Laplace exponent."""
    q = np.asarray(q, dtype=float)
    val = 0.5 * measure.c1 * q * q
    for w, s in measure.atoms:
        term = 0.0
        for si in s.masses():
            term = term + _exponential_defect(si, q)
        val = val + w * term
    return val if val.ndim else float(val)


def _linear_slope(measure: CoagulationMeasure) -> float:
    """Upper linear bound: decrease rate <= slope*q + (c1/2)q(q-1)."""
    return measure.c0 + sum(
        w * (max(s.s0, 0.0) + sum(s.masses())) for w, s in measure.atoms
    )


def _tail_integral(measure: CoagulationMeasure, lo: float) -> float:
    """Integral of 1/decrease-rate on [lo, infinity) (finite when c1 > 0)."""

    def integrand(u: float) -> float:
        q = lo / u
        return (lo / (u * u)) / block_decrease_rate(measure, q)

    val, _ = integrate.quad(integrand, 0.0, 1.0, limit=200)
    return val


@dataclass(frozen=True)
class SeriesDiagnostic:
    """Partial sums of 1/decrease-rate with a rigorous tail bracket."""

    terms: int
    partial_sum: float
    tail_lower: float
    tail_upper: float
    verdict: str  # converges | diverges | inconclusive
    reason: str

    @property
    def limit_estimate(self) -> float:
        if self.verdict != "converges":
            return math.inf
        return self.partial_sum + 0.5 * (self.tail_lower + self.tail_upper)

    @property
    def bracket_width(self) -> float:
        return self.tail_upper - self.tail_lower


def series_diagnostic(measure: CoagulationMeasure, terms: int = 10 ** 6) -> SeriesDiagnostic:
    """Sum 1/rate(n) up to ``terms`` plus an integral-comparison tail.

    Monotonicity of the rate brackets the tail between the integrals from
    ``terms+1`` and from ``terms``.  With finitely many atoms the tail is
    decidable: it is finite exactly when c1 > 0, because the atom part
    grows at most linearly.
    """
    ns = np.arange(1, terms + 1, dtype=float)
    vals = block_decrease_rate(measure, ns)
    if vals[0] <= 0.0:
        return SeriesDiagnostic(
            terms, math.inf, math.inf, math.inf, "diverges",
            "rate at one block is zero: nothing ever joins the distinguished block",
        )
    if np.any(vals <= 0.0):
        return SeriesDiagnostic(
            terms, math.inf, math.inf, math.inf, "diverges", "degenerate rate",
        )
    partial = float(np.sum(1.0 / vals))
    if measure.c1 > 0.0:
        tail_hi = _tail_integral(measure, float(terms))
        tail_lo = _tail_integral(measure, float(terms + 1))
        return SeriesDiagnostic(
            terms, partial, tail_lo, tail_hi, "converges",
            "quadratic pairwise part dominates the tail",
        )
    slope = _linear_slope(measure)
    if slope > 0.0:
        return SeriesDiagnostic(
            terms, partial, math.inf, math.inf, "diverges",
            "rate grows at most linearly: harmonic tail",
        )
    return SeriesDiagnostic(
        terms, partial, 0.0, math.inf, "inconclusive", "tail bounds straddle",
    )


@dataclass(frozen=True)
class IntegralDiagnostic:
    """Tail integral of 1/reproduction-exponent assessed over a sweep."""

    lower: float
    sweep: tuple[float, ...]
    values: tuple[float, ...]
    verdict: str  # converges | diverges | fails | inconclusive
    estimate: float
    reason: str


def integral_diagnostic(
    measure: CoagulationMeasure,
    lower: float = 1.0,
    sweep: tuple[float, ...] = (1e2, 1e4, 1e6),
) -> IntegralDiagnostic:
    """Quadrature of the condition-(ii) integral with a convergence sweep.

    The integral is evaluated up to each sweep endpoint; shrinking
    increments mean convergence (the final value is geometrically
    extrapolated), steady increments mean logarithmic divergence.
    """
    if len(sweep) < 3:
        raise ValueError("sweep needs at least three endpoints")
    if reproduction_exponent(measure, lower) <= 0.0:
        return IntegralDiagnostic(
            lower, tuple(sweep), (), "fails", math.inf,
            "reproduction part is degenerate: condition (ii) cannot hold",
        )

    def integrand(y: float) -> float:
        q = math.exp(y)
        return q / reproduction_exponent(measure, q)

    values = []
    acc = 0.0
    prev = math.log(lower)
    for stop in sweep:
        part, _ = integrate.quad(integrand, prev, math.log(stop), limit=200)
        acc += part
        values.append(acc)
        prev = math.log(stop)
    d1 = values[-2] - values[-3]
    d2 = values[-1] - values[-2]
    if d2 <= 1e-10 or (d1 > 0.0 and d2 / d1 < 0.2):
        ratio = d2 / d1 if d1 > 0.0 else 0.0
        estimate = values[-1] + d2 * ratio / (1.0 - ratio)
        return IntegralDiagnostic(
            lower, tuple(sweep), tuple(values), "converges", estimate,
            "sweep increments vanish geometrically",
        )
    if d1 > 0.0 and d2 / d1 > 0.5:
        return IntegralDiagnostic(
            lower, tuple(sweep), tuple(values), "diverges", math.inf,
            "sweep increments persist: logarithmic growth",
        )
    return IntegralDiagnostic(
        lower, tuple(sweep), tuple(values), "inconclusive", math.nan,
        "sweep trend is ambiguous at the resource cap",
    )


@dataclass(frozen=True)
class CDIReport:
    condition_i: bool
    regularity_value: float
    pfm_case: str  # zero | finite-positive | n/a
    series: SeriesDiagnostic
    integral: IntegralDiagnostic
    diagnosis: str  # extinct | does-not | inconclusive
    fixation_series_limit: float
    notes: tuple[str, ...]


def classify(
    measure: CoagulationMeasure,
    series_terms: int = 10 ** 6,
    integral_lower: float = 1.0,
    sweep: tuple[float, ...] = (1e2, 1e4, 1e6),
) -> CDIReport:
    """Extinction classification from the measure alone.

    Condition (i) asks for immigration pressure (c0 > 0 or an atom with
    distinguished mass); condition (ii) for a convergent reproduction
    tail integral.  Atoms without dust trigger the finite-types
    reduction: after an exponential time only finitely many ancestral
    lines remain, so the verdict holds without the tail criterion, but
    it still needs immigration pressure to end in the immigrant type.
    """
    notes = []
    condition_i = measure.c0 > 0.0 or any(
        w > 0.0 and s.s0 > 0.0 for w, s in measure.atoms
    )
    regularity = sum(
        w * (max(s.s0, 0.0) + sum(s.masses())) ** 2 for w, s in measure.atoms
    )
    if measure.atoms:
        notes.append(
            "regularity value is always finite for atomic reproduction measures; "
            "it does not vouch for a heavy-tailed family the atoms may discretize"
        )
        pfm = "finite-positive" if any(
            w > 0.0 and s.dust <= 1e-12 for w, s in measure.atoms
        ) else "zero"
    else:
        pfm = "n/a"
    series = series_diagnostic(measure, terms=series_terms)
    integral = integral_diagnostic(measure, lower=integral_lower, sweep=sweep)

    if pfm == "finite-positive":
        notes.append(
            "atoms without dust have positive total weight: after an exponential "
            "holding time only finitely many ancestral types survive, so the "
            "finite-type reduction applies regardless of the tail integral"
        )
        if condition_i:
            diagnosis = "extinct"
        else:
            diagnosis = "inconclusive"
            notes.append(
                "finite-type reduction holds but nothing pushes mass to the "
                "immigrant type: absorption needs immigration pressure"
            )
    else:
        if condition_i and integral.verdict == "converges":
            diagnosis = "extinct"
        elif integral.verdict == "inconclusive" and condition_i:
            diagnosis = "inconclusive"
        else:
            diagnosis = "does-not"
        if not condition_i:
            notes.append("condition (i) fails: no immigration pressure")
        if integral.verdict in ("diverges", "fails"):
            notes.append("condition (ii) fails: reproduction tail integral diverges")

    limit = series.limit_estimate
    return CDIReport(
        condition_i, regularity, pfm, series, integral, diagnosis, limit, tuple(notes)
    )


@dataclass(frozen=True)
class FixationBoundRow:
    n: int
    replicates: int
    censored: int
    mean: float
    se: float
    bound: float

    @property
    def verdict(self) -> bool:
        return self.mean <= self.bound + 3.0 * self.se


@dataclass(frozen=True)
class FixationBoundReport:
    rows: tuple[FixationBoundRow, ...]

    @property
    def verdict(self) -> bool:
        return all(r.verdict for r in self.rows)


def fixation_bound_check(
    measure: CoagulationMeasure,
    resolutions: tuple[int, ...],
    replicates: int,
    rng: np.random.Generator,
    time_cap: float = 1e6,
) -> FixationBoundReport:
    """Empirical absorption times against the bound sum_{k<=n} 1/rate(k).

    The per-resolution bound is finite whenever the decrease rate is
    positive up to n, even if the full series diverges; a vanishing rate
    makes the bound undefined and the check refuses.
    """
    top = max(resolutions)
    rates = block_decrease_rate(measure, np.arange(1, top + 1, dtype=float))
    if np.any(rates <= 0.0):
        raise ValueError("bound undefined: block decrease rate vanishes on the range")
    bounds = np.cumsum(1.0 / rates)
    samplers: dict = {}
    rows = []
    for n in resolutions:
        times = []
        censored = 0
        for _ in range(replicates):
            t = sample_fixation_time(measure, n, rng, time_cap=time_cap, samplers=samplers)
            if t is None:
                censored += 1
            else:
                times.append(t)
        arr = np.asarray(times)
        mean = float(arr.mean()) if arr.size else math.inf
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else math.inf
        rows.append(
            FixationBoundRow(n, replicates, censored, mean, se, float(bounds[n - 1]))
        )
    return FixationBoundReport(tuple(rows))


def concavity_gap(measure: CoagulationMeasure, qs: np.ndarray) -> float:
    """Largest increase between consecutive slopes of psi(q)/q (<= 0 if concave)."""
    qs = np.asarray(qs, dtype=float)
    h = laplace_exponent(measure, qs) / qs
    slopes = np.diff(h) / np.diff(qs)
    return float(np.max(np.diff(slopes))) if slopes.size > 1 else -math.inf


def sandwich_ratios(measure: CoagulationMeasure, qs: np.ndarray) -> tuple[float, float]:
    """Realized (min, max) of decrease-rate / laplace-exponent over the grid."""
    qs = np.asarray(qs, dtype=float)
    num = block_decrease_rate(measure, qs)
    den = laplace_exponent(measure, qs)
    if np.any(den <= 0.0):
        raise ValueError("laplace exponent vanishes on the grid")
    r = num / den
    return float(r.min()), float(r.max())


def block_decrease_rate_mc(
    measure: CoagulationMeasure,
    n: int,
    samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Simulation oracle for the decrease rate at block count n.

    Colour n items per atom paint-box and average the decrease
    Y_0 + sum_l (Y_l - 1{Y_l > 0}); the Kingman parts are exact.  Returns
    (estimate, standard error); the standard error covers the atom part
    only.
    """
    exact_part = measure.c0 * n + 0.5 * measure.c1 * n * (n - 1)
    est = exact_part
    var = 0.0
    for w, s in measure.atoms:
        masses = s.masses()
        probs = np.array([max(s.s0, 0.0), *masses, max(s.dust, 0.0)])
        probs = probs / probs.sum()
        counts = rng.multinomial(n, probs, size=samples)
        y0 = counts[:, 0]
        yl = counts[:, 1:-1]
        decrease = y0 + (yl - (yl > 0)).sum(axis=1)
        est += w * float(decrease.mean())
        var += (w ** 2) * float(decrease.var(ddof=1)) / samples
    return est, math.sqrt(var)
