"""Campaign orchestration: config ingestion, unit fan-out and reports."""

from __future__ import annotations

import dataclasses
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import IO

from . import analytics
from .analytics import AggregateStats, CampaignMode, RegimeVerdict
from .errors import OrderingNotValidated, ParseError, ReportIOError
from .planner import DerivedPlan, ExperimentConfig, derive_plan
from .rng import unit_seed
from .simkernel import DelayedChoice, HypothesisModel, UnitResult, run_unit, write_trace

DEFAULT_UNITS = 1000
_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig) if f.name != "supplied"}


def _parse_value(key: str, text: str, line: int):
    kind = _FIELD_TYPES[key]
    if kind == "str":
        return text
    try:
        number = float(text)
    except ValueError:
        raise ParseError(line, f"{key}: cannot parse {text!r} as a number") from None
    if kind == "int":
        if not number.is_integer():
            raise ParseError(line, f"{key}: expected an integer, got {text!r}")
        return int(number)
    return number


def load_config(source: str) -> ExperimentConfig:
    """Parse ``key = value`` lines (SI units, ``#`` comments).

    Missing keys keep their defaults; unknown or repeated keys are a
    ParseError.  The result is validated before it is returned.
    """
    values = {}
    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ParseError(lineno, f"expected 'key = value', got {text!r}")
        key, value = (part.strip() for part in text.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in values:
            raise ParseError(lineno, f"duplicate key {key!r}")
        if not value:
            raise ParseError(lineno, f"missing value for {key!r}")
        values[key] = _parse_value(key, value, lineno)
    config = ExperimentConfig(**values, supplied=frozenset(values))
    config.validate()
    return config


def dump_config(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {v!r}\n" if isinstance(v, float) else f"{k} = {v}\n"
                   for k, v in config.physical_items())


@dataclass(frozen=True)
class CampaignSpec:
    config: ExperimentConfig
    model: HypothesisModel
    choice: DelayedChoice
    units: int = DEFAULT_UNITS
    master_seed: int = 0
    mode: CampaignMode = CampaignMode.SEQUENTIAL
    output_path: str | None = None
    alpha: float = analytics.DEFAULT_ALPHA
    trace_path: str | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.units < 1:
            raise ValueError("units must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")

    def seeds(self) -> list[int]:
        return [unit_seed(self.master_seed, i) for i in range(self.units)]


@dataclass(frozen=True)
class CampaignReport:
    spec: CampaignSpec
    plan: DerivedPlan
    results: tuple[UnitResult, ...] = ()
    aggregate: AggregateStats | None = None
    verdict: RegimeVerdict | None = None
    predicted: analytics.Moments | None = None
    wall_seconds: float = 0.0

    @property
    def gated(self) -> bool:
        return not self.plan.ordering_ok


def _simulate_chunk(args) -> tuple[list[UnitResult], str]:
    config, plan, model, choice, start, seeds, with_traces = args
    results = []
    buf = io.StringIO() if with_traces else None
    for offset, seed in enumerate(seeds):
        trace, result = run_unit(plan, config, seed, model, choice)
        results.append(result)
        if buf is not None:
            write_trace(trace, buf, unit_index=start + offset)
    return results, buf.getvalue() if buf is not None else ""


def _chunks(spec: CampaignSpec, plan: DerivedPlan, n_chunks: int):
    seeds = spec.seeds()
    size = -(-len(seeds) // n_chunks)
    with_traces = spec.trace_path is not None
    return [(spec.config, plan, spec.model, spec.choice, i, seeds[i:i + size], with_traces)
            for i in range(0, len(seeds), size)]


def simulate_units(spec: CampaignSpec, plan: DerivedPlan) -> tuple[list[UnitResult], str]:
    """Run every unit of the campaign, returning results in unit-index order.

    Parallel mode splits the index range over worker processes; each unit's
    seed depends only on (master_seed, index), so the output is the same as
    the sequential loop.
    """
    if spec.mode is CampaignMode.PARALLEL:
        workers = spec.workers or os.cpu_count() or 1
        jobs = _chunks(spec, plan, max(workers, 1))
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_simulate_chunk, jobs))
        else:
            parts = [_simulate_chunk(job) for job in jobs]
    else:
        parts = [_simulate_chunk(job) for job in _chunks(spec, plan, 1)]
    results = [r for part, _ in parts for r in part]
    return results, "".join(text for _, text in parts)


def gated_report(spec: CampaignSpec, plan: DerivedPlan | None = None) -> CampaignReport:
    return CampaignReport(spec=spec, plan=plan or derive_plan(spec.config))


def run_campaign(spec: CampaignSpec) -> CampaignReport:
    started = time.perf_counter()
    plan = derive_plan(spec.config)
    if not plan.ordering_ok:
        raise OrderingNotValidated(plan.check("ordering").detail)
    results, traces = simulate_units(spec, plan)
    if spec.trace_path is not None:
        with open(spec.trace_path, "w") as fh:
            fh.write(traces)
    aggregate = analytics.aggregate_units(results, spec.mode)
    verdict = analytics.classify_regime(aggregate.total_monitored, aggregate.units,
                                        plan, spec.config, spec.alpha)
    predicted = analytics.analytic_moments(plan, spec.config, spec.model, spec.choice,
                                           occupancy_corrected=True)
    return CampaignReport(spec, plan, tuple(results), aggregate, verdict, predicted,
                          time.perf_counter() - started)


# --- serialization -------------------------------------------------------

SUMMARY_FIELDS = ("model", "choice", "units", "seed", "observed_total", "z_causal", "z_ic", "regime")


def summary_record(model: str, choice: str, units: int, seed, verdict: RegimeVerdict | None) -> str:
    """One ``key=value`` line with the fields in SUMMARY_FIELDS."""
    if verdict is None:
        stats = ("NA", "NA", "NA", "NotValidated")
    else:
        stats = (str(verdict.observed_total), f"{verdict.z_causal:.6f}",
                 f"{verdict.z_ic:.6f}", verdict.regime.value)
    values = (model, choice, str(units), str(seed)) + stats
    return " ".join(f"{k}={v}" for k, v in zip(SUMMARY_FIELDS, values))


def _kv(lines: list[str], pairs) -> None:
    pairs = list(pairs)
    width = max(len(k) for k, _ in pairs)
    lines.extend(f"  {k.ljust(width)} = {v}" for k, v in pairs)


def plan_lines(plan: DerivedPlan, config: ExperimentConfig) -> list[str]:
    lines = ["[config]"]
    _kv(lines, [(k, f"{v:.6g}" if isinstance(v, float) else v) for k, v in config.physical_items()])
    lines.append("[plan]")
    _kv(lines, [
        ("t_observe", f"{plan.t_observe:.6g}"),
        ("f_pump", f"{plan.f_pump:.6g}"),
        ("mu0", f"{plan.mu0:.6g}"),
        ("mode_count", plan.mode_count),
        ("dt_bin", f"{plan.dt_bin:.6g}"),
        ("n_entangled", f"{plan.n_entangled:.6g}"),
        ("t_end", f"{plan.t_end:.6g}"),
        ("n_pulses", plan.n_pulses),
    ])
    lines.append("[validation]")
    _kv(lines, [(r.name, ("PASS" if r.passed else "FAIL " + ",".join(r.failures)) + f"  ({r.detail})")
                for r in plan.validation])
    notes = [f"warning: {w}" for w in plan.warnings]
    if config.is_default("fidelity"):
        notes.append(f"fidelity F = {config.fidelity:g} is an assumed default, not a measured value")
    if config.is_default("coherence_time"):
        notes.append(f"coherence_time = {config.coherence_time:g} s is a placeholder; "
                     "supply the source's value for real planning")
    if notes:
        lines.append("[notes]")
        lines.extend(f"  {n}" for n in notes)
    return lines


def format_plan(plan: DerivedPlan, config: ExperimentConfig) -> str:
    return "\n".join(plan_lines(plan, config)) + "\n"


def verdict_lines(verdict: RegimeVerdict) -> list[str]:
    lines = ["[verdict]"]
    _kv(lines, [
        ("alpha", f"{verdict.alpha:g}"),
        ("z_critical", f"{verdict.z_critical:.4f}"),
        ("expected_causal", f"{verdict.expected_causal:.6g}"),
        ("expected_ic", f"{verdict.expected_ic:.6g}"),
        ("z_causal", f"{verdict.z_causal:.4f}"),
        ("z_ic", f"{verdict.z_ic:.4f}"),
        ("log_likelihood_ratio", f"{verdict.log_likelihood_ratio:.4f}"),
        ("regime", verdict.regime.value),
    ])
    lines.append(f"  {verdict.description}")
    return lines


def _human(report: CampaignReport, include_timing: bool) -> str:
    spec = report.spec
    lines = []
    if report.gated:
        ordering = report.plan.check("ordering")
        lines.append(f"VALIDATION FAILED: ordering ({', '.join(ordering.failures)}): {ordering.detail}")
        lines.append("no statistics produced")
    lines.append("[campaign]")
    _kv(lines, [("model", spec.model.value), ("choice", spec.choice.value), ("units", spec.units),
                ("master_seed", spec.master_seed), ("mode", spec.mode.value)])
    lines.extend(plan_lines(report.plan, spec.config))
    if not report.gated:
        agg = report.aggregate
        lines.append("[statistics]")
        _kv(lines, [
            ("total_monitored", agg.total_monitored),
            ("total_signal", agg.total_signal),
            ("total_capable", agg.total_capable),
            ("mean_per_unit", f"{agg.mean:.6f}"),
            ("variance_per_unit", f"{agg.variance:.6f}"),
            ("predicted_mean", f"{report.predicted.mean:.6f}"),
            ("predicted_sigma", f"{report.predicted.sigma:.6f}"),
        ])
        lines.extend(verdict_lines(report.verdict))
    if include_timing:
        lines.append(f"wall_seconds = {report.wall_seconds:.3f}")
    return "\n".join(lines) + "\n"


def emit_report(report: CampaignReport, fmt: str = "human", sink: IO[str] | None = None,
                include_timing: bool = False) -> str:
    if fmt == "machine":
        s = report.spec
        text = summary_record(s.model.value, s.choice.value, s.units, s.master_seed,
                              None if report.gated else report.verdict) + "\n"
    elif fmt == "human":
        text = _human(report, include_timing)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if sink is not None:
        try:
            sink.write(text)
            sink.flush()
        except OSError as exc:
            raise ReportIOError(str(exc)) from exc
    return text
