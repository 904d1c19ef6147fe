"""Command-line experiment orchestration and report emission.

Every subcommand reads a TOML config, runs a deterministic experiment and
writes ``results.csv`` (one row per measurement, fixed column schema) and
``summary.txt`` (canonical config echo plus verdicts).  Reruns with the
same config are byte-identical.  Exit codes: 0 ok, 2 config error,
3 resource cap exceeded, 4 at least one check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from . import extinction, flows, harness, population
from .config import KINDS, ConfigError, ExperimentConfig, parse_config, serialize_config
from .exact import ResourceCapError, enumerate_space
from .functionals import DiscreteLaw
from .measures import CoagulationMeasure
from .partitions import singletons

__all__ = ["main", "run", "RunResult"]

CSV_HEADER = ("experiment", "params", "estimate", "se", "exact", "z", "verdict")


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


@dataclass(frozen=True)
class Row:
    params: str
    estimate: str = ""
    se: str = ""
    exact: str = ""
    z: str = ""
    verdict: str = ""


@dataclass(frozen=True)
class RunResult:
    kind: str
    rows: tuple[Row, ...]
    notes: tuple[str, ...]
    failed: bool


def _run_rates_table(cfg: ExperimentConfig) -> RunResult:
    space = enumerate_space(cfg.p)
    rows = []
    for pi in space.parts:
        if pi.is_singletons:
            continue
        rows.append(Row(f"pi={pi}", estimate=_num(cfg.measure.jump_rate(pi))))
    rows.append(Row("total_rate", estimate=_num(cfg.measure.total_rate(cfg.p))))
    return RunResult(cfg.kind, tuple(rows), (), False)


def _run_simulate_coalescent(cfg: ExperimentConfig) -> RunResult:
    rng = np.random.default_rng(cfg.seed)
    children = rng.spawn(cfg.replicates)
    rows = []
    block_sums = {t: 0.0 for t in cfg.times}
    absorbed = 0
    for r, child in enumerate(children):
        log = flows.simulate_events(cfg.measure, cfg.n, cfg.horizon, child)
        traj = flows.backward_trajectory(log)
        for t in cfg.times:
            blocks = traj.state_at(t).num_blocks
            block_sums[t] += blocks
            rows.append(Row(f"replicate={r};t={_num(t)};stat=blocks", estimate=str(blocks)))
        zeta = flows.absorption_time(log)
        rows.append(Row(f"replicate={r};stat=absorption", estimate=_num(zeta)))
        absorbed += zeta is not None
    notes = [
        f"mean blocks at t={_num(t)}: {_num(block_sums[t] / cfg.replicates)}"
        for t in cfg.times
    ]
    notes.append(f"absorbed by horizon: {absorbed}/{cfg.replicates}")
    return RunResult(cfg.kind, tuple(rows), tuple(notes), False)


def _run_simulate_gfvi(cfg: ExperimentConfig) -> RunResult:
    rng = np.random.default_rng(cfg.seed)
    children = rng.spawn(cfg.replicates)
    rows = []
    mass_sums = {t: 0.0 for t in cfg.times}
    for r, child in enumerate(children):
        log = flows.simulate_events(cfg.measure, cfg.n, cfg.horizon, child)
        types = population.assign_types(cfg.n, cfg.initial_law, child)
        for t in cfg.times:
            v = population.types_at(log, types, t)
            mass = float((v == 0.0).mean())
            mass_sums[t] += mass
            rows.append(
                Row(f"replicate={r};t={_num(t)};stat=immigrant_mass", estimate=_num(mass))
            )
            if cfg.functional is not None:
                moment = population.empirical_moment(v, cfg.functional)
                rows.append(
                    Row(f"replicate={r};t={_num(t)};stat=moment", estimate=_num(moment))
                )
    notes = [
        f"mean immigrant mass at t={_num(t)}: {_num(mass_sums[t] / cfg.replicates)}"
        for t in cfg.times
    ]
    return RunResult(cfg.kind, tuple(rows), tuple(notes), False)


def _run_duality_check(cfg: ExperimentConfig) -> RunResult:
    if cfg.functional is None:
        raise ConfigError(["duality-check needs a [[functional.factors]] table"])
    if not isinstance(cfg.initial_law, DiscreteLaw):
        raise ConfigError(["duality-check needs an atomic (discrete) initial law"])
    p = cfg.functional.arity
    start = cfg.start if cfg.start is not None else singletons(p)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    failed = False
    for t in cfg.times:
        rep = harness.duality_moment_test(
            cfg.measure, cfg.initial_law, cfg.functional, start, t,
            n_particles=cfg.n, replicates=cfg.replicates, rng=rng,
            bias_coeff=cfg.bias_coeff, threads=cfg.threads,
        )
        verdict = "pass" if rep.verdict else "fail"
        failed |= not rep.verdict
        rows.append(
            Row(
                f"t={_num(t)};p={p};pi={start}",
                estimate=_num(rep.estimate), se=_num(rep.se),
                exact=_num(rep.exact), z=_num(rep.z), verdict=verdict,
            )
        )
    return RunResult(cfg.kind, tuple(rows), (), failed)


def _run_marginal_check(cfg: ExperimentConfig) -> RunResult:
    rng = np.random.default_rng(cfg.seed)
    rows = []
    failed = False
    for t in cfg.times:
        rep = harness.marginal_test(
            cfg.measure, cfg.p, t, cfg.replicates, rng, significance=cfg.significance
        )
        critical = stats.chi2.ppf(1.0 - cfg.significance, rep.df) if rep.df else 0.0
        verdict = "pass" if rep.verdict else "fail"
        failed |= not rep.verdict
        rows.append(
            Row(
                f"t={_num(t)};p={cfg.p};df={rep.df};merged={rep.merged_cells}",
                estimate=_num(rep.statistic), exact=_num(critical),
                z=_num(rep.p_value), verdict=verdict,
            )
        )
    return RunResult(cfg.kind, tuple(rows), (), failed)


def _run_cdi_report(cfg: ExperimentConfig) -> RunResult:
    report = extinction.classify(
        cfg.measure,
        series_terms=cfg.series_terms,
        integral_lower=cfg.integral_lower,
        sweep=cfg.integral_sweep,
    )
    rows = [
        Row("condition_i", estimate=str(int(report.condition_i))),
        Row("regularity_value", estimate=_num(report.regularity_value)),
        Row("pfm_case", verdict=report.pfm_case),
        Row(
            f"series;terms={report.series.terms}",
            estimate=_num(report.series.partial_sum),
            se=_num(report.series.bracket_width),
            exact=_num(report.series.limit_estimate),
            verdict=report.series.verdict,
        ),
        Row(
            "integral;sweep=" + " ".join(_num(q) for q in report.integral.sweep),
            estimate=_num(report.integral.estimate),
            verdict=report.integral.verdict,
        ),
        Row("diagnosis", verdict=report.diagnosis),
    ]
    failed = False
    if cfg.fixation_resolutions:
        rng = np.random.default_rng(cfg.seed)
        bound_report = extinction.fixation_bound_check(
            cfg.measure, cfg.fixation_resolutions, cfg.replicates, rng,
            time_cap=cfg.time_cap,
        )
        for row in bound_report.rows:
            verdict = "pass" if row.verdict else "fail"
            failed |= not row.verdict
            rows.append(
                Row(
                    f"fixation;n={row.n};censored={row.censored}",
                    estimate=_num(row.mean), se=_num(row.se),
                    exact=_num(row.bound), verdict=verdict,
                )
            )
    notes = report.notes
    return RunResult(cfg.kind, tuple(rows), notes, failed)


_RUNNERS = {
    "rates-table": _run_rates_table,
    "simulate-coalescent": _run_simulate_coalescent,
    "simulate-gfvi": _run_simulate_gfvi,
    "duality-check": _run_duality_check,
    "marginal-check": _run_marginal_check,
    "cdi-report": _run_cdi_report,
}


def run(cfg: ExperimentConfig) -> RunResult:
    if cfg.kind not in _RUNNERS:
        raise ConfigError([f"unknown experiment kind {cfg.kind!r}"])
    return _RUNNERS[cfg.kind](cfg)


def render_csv(result: RunResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in result.rows:
        writer.writerow(
            (result.kind, row.params, row.estimate, row.se, row.exact, row.z, row.verdict)
        )
    return buf.getvalue()


def render_summary(cfg: ExperimentConfig, result: RunResult) -> str:
    lines = ["# gfvi run", "", serialize_config(cfg).rstrip(), "", "# results"]
    for row in result.rows:
        if row.verdict:
            lines.append(f"{row.params}: {row.verdict}")
    lines.extend(f"note: {n}" for n in result.notes)
    lines.append(f"rows = {len(result.rows)}")
    lines.append(f"status = {'fail' if result.failed else 'ok'}")
    return "\n".join(lines) + "\n"


def emit_report(cfg: ExperimentConfig, result: RunResult, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(render_csv(result))
    (out / "summary.txt").write_text(render_summary(cfg, result))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gfvi",
        description="Exchangeable coalescents with immigration: simulation and exact checks",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        k = sub.add_parser(kind)
        k.add_argument("--config", required=True)
        k.add_argument("--seed", type=int, default=None)
        k.add_argument("--out", default=None)
        k.add_argument("--replicates", type=int, default=None)
        k.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
        cfg = cfg.override(
            kind=args.kind, seed=args.seed, out=args.out or None,
            replicates=args.replicates, threads=args.threads,
        )
        result = run(cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    emit_report(cfg, result, cfg.out or ".")
    return 4 if result.failed else 0


if __name__ == "__main__":
    sys.exit(main())
