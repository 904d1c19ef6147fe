"""Experiment configuration: TOML parsing, validation, serialization.

Configs are plain TOML.  Every run is fully determined by (config, seed):
seeding is mandatory, wall clocks are never consulted, and replicate r
always draws from the r-th spawned child of the base seed so results do
not depend on host parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

try:  # tomllib landed in 3.11; tomli is the same parser
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .functionals import DiscreteLaw, IndicatorFactor, MomentFunctional, PolyFactor
from .measures import CoagulationMeasure
from .partitions import DistinguishedPartition, MassPartition

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "KINDS"]

KINDS = (
    "simulate-coalescent",
    "simulate-gfvi",
    "duality-check",
    "marginal-check",
    "cdi-report",
    "rates-table",
)


class ConfigError(ValueError):
    """Invalid configuration; carries the full violation list."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    measure: CoagulationMeasure
    out: str = ""
    replicates: int = 10 ** 4
    threads: int = 1
    n: int = 10 ** 3
    horizon: float = 1.0
    times: tuple[float, ...] = (1.0,)
    p: int = 2
    start: DistinguishedPartition | None = None
    initial_law: DiscreteLaw | str = "uniform"
    functional: MomentFunctional | None = None
    bias_coeff: float = 2.0
    significance: float = 0.001
    series_terms: int = 10 ** 6
    integral_lower: float = 1.0
    integral_sweep: tuple[float, ...] = (1e2, 1e4, 1e6)
    fixation_resolutions: tuple[int, ...] = ()
    time_cap: float = 1e6

    def override(self, **kwargs) -> "ExperimentConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self


_TOP_KEYS = {
    "kind", "seed", "out", "replicates", "threads", "measure", "experiment",
    "initial_law", "functional",
}
_EXP_KEYS = {
    "n", "horizon", "times", "p", "start", "bias_coeff", "significance",
    "series_terms", "integral_lower", "integral_sweep", "fixation_resolutions",
    "time_cap",
}


def _parse_measure(raw, problems) -> CoagulationMeasure:
    c0 = float(raw.get("c0", 0.0))
    c1 = float(raw.get("c1", 0.0))
    atoms = []
    for k, entry in enumerate(raw.get("atoms", [])):
        try:
            s = MassPartition(float(entry.get("s0", 0.0)),
                              tuple(float(x) for x in entry.get("s", [])))
            atoms.append((float(entry["weight"]), s))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"measure.atoms[{k}]: {exc}")
    measure = CoagulationMeasure(c0, c1, tuple(atoms))
    report = measure.validate()
    problems.extend(f"measure: {v}" for v in report.violations)
    return measure


def _parse_law(raw, problems):
    kind = raw.get("kind", "uniform")
    if kind in ("uniform", "distinct"):
        return kind
    if kind == "discrete":
        try:
            return DiscreteLaw(tuple(float(v) for v in raw["values"]),
                               tuple(float(w) for w in raw["weights"]))
        except (KeyError, ValueError) as exc:
            problems.append(f"initial_law: {exc}")
            return "uniform"
    problems.append(f"initial_law: unknown kind {kind!r}")
    return "uniform"


def _parse_functional(raw, problems) -> MomentFunctional | None:
    factors = []
    for k, entry in enumerate(raw.get("factors", [])):
        if "poly" in entry:
            factors.append(PolyFactor(tuple(float(c) for c in entry["poly"])))
        elif "indicator" in entry:
            factors.append(IndicatorFactor(tuple(float(a) for a in entry["indicator"])))
        else:
            problems.append(f"functional.factors[{k}]: need 'poly' or 'indicator'")
    if not factors:
        return None
    return MomentFunctional(tuple(factors))


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"TOML syntax: {exc}"]) from exc
    problems: list[str] = []
    for key in raw:
        if key not in _TOP_KEYS:
            problems.append(f"unknown top-level key {key!r}")
    kind = raw.get("kind", "")
    if kind and kind not in KINDS:
        problems.append(f"unknown experiment kind {kind!r}")
    if "seed" not in raw:
        problems.append("seed is mandatory (runs never seed from the clock)")
    measure = _parse_measure(raw.get("measure", {}), problems)
    law = _parse_law(raw.get("initial_law", {}), problems)
    functional = _parse_functional(raw.get("functional", {}), problems)
    exp = raw.get("experiment", {})
    for key in exp:
        if key not in _EXP_KEYS:
            problems.append(f"unknown experiment key {key!r}")
    start = None
    if "start" in exp:
        try:
            start = DistinguishedPartition(tuple(int(x) for x in exp["start"]))
        except (TypeError, ValueError) as exc:
            problems.append(f"experiment.start: {exc}")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        kind=kind,
        seed=int(raw["seed"]),
        measure=measure,
        out=str(raw.get("out", "")),
        replicates=int(raw.get("replicates", 10 ** 4)),
        threads=int(raw.get("threads", 1)),
        n=int(exp.get("n", 10 ** 3)),
        horizon=float(exp.get("horizon", 1.0)),
        times=tuple(float(t) for t in exp.get("times", [1.0])),
        p=int(exp.get("p", 2)),
        start=start,
        initial_law=law,
        functional=functional,
        bias_coeff=float(exp.get("bias_coeff", 2.0)),
        significance=float(exp.get("significance", 0.001)),
        series_terms=int(exp.get("series_terms", 10 ** 6)),
        integral_lower=float(exp.get("integral_lower", 1.0)),
        integral_sweep=tuple(float(q) for q in exp.get("integral_sweep", [1e2, 1e4, 1e6])),
        fixation_resolutions=tuple(int(x) for x in exp.get("fixation_resolutions", [])),
        time_cap=float(exp.get("time_cap", 1e6)),
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {value!r}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical TOML rendering; parse(serialize(parse(x))) == parse(x)."""
    lines = [
        f"kind = {_fmt(cfg.kind)}",
        f"seed = {cfg.seed}",
        f"out = {_fmt(cfg.out)}",
        f"replicates = {cfg.replicates}",
        f"threads = {cfg.threads}",
        "",
        "[measure]",
        f"c0 = {_fmt(float(cfg.measure.c0))}",
        f"c1 = {_fmt(float(cfg.measure.c1))}",
    ]
    for w, s in cfg.measure.atoms:
        lines += [
            "",
            "[[measure.atoms]]",
            f"weight = {_fmt(float(w))}",
            f"s0 = {_fmt(float(s.s0))}",
            f"s = {_fmt([float(x) for x in s.s])}",
        ]
    lines += ["", "[experiment]"]
    lines += [
        f"n = {cfg.n}",
        f"horizon = {_fmt(cfg.horizon)}",
        f"times = {_fmt(list(cfg.times))}",
        f"p = {cfg.p}",
    ]
    if cfg.start is not None:
        lines.append(f"start = {_fmt(list(cfg.start.assignment))}")
    lines += [
        f"bias_coeff = {_fmt(cfg.bias_coeff)}",
        f"significance = {_fmt(cfg.significance)}",
        f"series_terms = {cfg.series_terms}",
        f"integral_lower = {_fmt(cfg.integral_lower)}",
        f"integral_sweep = {_fmt(list(cfg.integral_sweep))}",
        f"fixation_resolutions = {_fmt(list(cfg.fixation_resolutions))}",
        f"time_cap = {_fmt(cfg.time_cap)}",
        "",
        "[initial_law]",
    ]
    if isinstance(cfg.initial_law, DiscreteLaw):
        lines += [
            'kind = "discrete"',
            f"values = {_fmt(list(cfg.initial_law.values))}",
            f"weights = {_fmt(list(cfg.initial_law.weights))}",
        ]
    else:
        lines.append(f"kind = {_fmt(cfg.initial_law)}")
    if cfg.functional is not None:
        for factor in cfg.functional.factors:
            lines += ["", "[[functional.factors]]"]
            if isinstance(factor, PolyFactor):
                lines.append(f"poly = {_fmt(list(factor.coeffs))}")
            else:
                lines.append(f"indicator = {_fmt(list(factor.atoms))}")
    return "\n".join(lines) + "\n"
