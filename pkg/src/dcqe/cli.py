"""Command-line front end.

Exit status: 0 success, 1 validation failure, 2 parse/config error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import analytics
from .analytics import CampaignMode
from .errors import DcqeError, DegeneratePredictions, InvalidConfig, ParseError, ReportIOError
from .harness import (DEFAULT_UNITS, CampaignSpec, emit_report, format_plan, gated_report,
                      load_config, run_campaign, summary_record, verdict_lines)
from .planner import derive_plan
from .simkernel import DelayedChoice, HypothesisModel

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file (defaults if omitted)")
    p.add_argument("--format", choices=["human", "machine"], default="human")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcqe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="derive and validate the unit plan")
    _common(p)

    p = sub.add_parser("simulate", help="run a Monte Carlo campaign")
    _common(p)
    p.add_argument("--model", choices=[m.value for m in HypothesisModel], default="causal")
    p.add_argument("--choice", choices=[c.value for c in DelayedChoice], default="erase")
    p.add_argument("--units", type=int, default=DEFAULT_UNITS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=[m.value for m in CampaignMode], default="sequential")
    p.add_argument("--alpha", type=float, default=analytics.DEFAULT_ALPHA)
    p.add_argument("--workers", type=int, default=None, help="processes for --mode parallel")
    p.add_argument("--dump-traces", metavar="PATH", help="write per-pair event traces here")
    p.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true", help="append wall-clock time (human format)")

    p = sub.add_parser("analyze", help="classify externally measured monitored-port totals")
    _common(p)
    p.add_argument("--observed-total", type=int, required=True)
    p.add_argument("--units", type=int, required=True)
    p.add_argument("--choice", choices=[c.value for c in DelayedChoice], default="erase")
    p.add_argument("--alpha", type=float, default=analytics.DEFAULT_ALPHA)

    p = sub.add_parser("power", help="units needed to separate the two hypotheses")
    _common(p)
    p.add_argument("--alpha", type=float, default=analytics.DEFAULT_ALPHA)
    p.add_argument("--beta", type=float, default=analytics.DEFAULT_ALPHA)
    return parser


def _load(path: str | None):
    if path is None:
        return load_config("")
    with open(path) as fh:
        return load_config(fh.read())


def _cmd_plan(args, out) -> int:
    config = _load(args.config)
    plan = derive_plan(config)
    if args.format == "machine":
        checks = " ".join(f"{r.name}={'pass' if r.passed else ','.join(r.failures)}"
                          for r in plan.validation)
        out.write(f"t_observe={plan.t_observe!r} f_pump={plan.f_pump!r} mu0={plan.mu0!r} "
                  f"mode_count={plan.mode_count} dt_bin={plan.dt_bin!r} "
                  f"n_entangled={plan.n_entangled!r} t_end={plan.t_end!r} {checks}\n")
    else:
        out.write(format_plan(plan, config))
    return EXIT_OK if plan.all_passed else EXIT_VALIDATION


def _cmd_simulate(args, out) -> int:
    config = _load(args.config)
    spec = CampaignSpec(
        config=config, model=HypothesisModel(args.model), choice=DelayedChoice(args.choice),
        units=args.units, master_seed=args.seed, mode=CampaignMode(args.mode),
        output_path=args.output, alpha=args.alpha, trace_path=args.dump_traces,
        workers=args.workers,
    )
    plan = derive_plan(config)
    if not plan.ordering_ok:
        emit_report(gated_report(spec, plan), args.format, out)
        return EXIT_VALIDATION
    report = run_campaign(spec)
    if spec.output_path:
        with open(spec.output_path, "w") as fh:
            emit_report(report, args.format, fh, include_timing=args.timing)
    else:
        emit_report(report, args.format, out, include_timing=args.timing)
    return EXIT_OK


def _cmd_analyze(args, out) -> int:
    config = _load(args.config)
    plan = derive_plan(config)
    if not plan.ordering_ok:
        out.write(f"VALIDATION FAILED: ordering ({', '.join(plan.check('ordering').failures)}): "
                  f"{plan.check('ordering').detail}\nno statistics produced\n")
        return EXIT_VALIDATION
    verdict = analytics.classify_regime(args.observed_total, args.units, plan, config, args.alpha)
    if args.format == "machine":
        out.write(summary_record("external", args.choice, args.units, "NA", verdict) + "\n")
    else:
        out.write(format_plan(plan, config))
        out.write("\n".join(verdict_lines(verdict)) + "\n")
    return EXIT_OK


def _cmd_power(args, out) -> int:
    config = _load(args.config)
    plan = derive_plan(config)
    units = analytics.power_analysis(plan, config, args.alpha, args.beta)
    lo, hi = sorted(analytics.reference_means(plan, config))
    test = analytics.threshold_test(units, lo, hi, args.alpha)
    fields = [("units_required", units), ("threshold", test.threshold),
              ("type1", f"{test.type1:.6g}"), ("type2", f"{test.type2:.6g}"),
              ("alpha", f"{args.alpha:g}"), ("beta", f"{args.beta:g}")]
    if args.format == "machine":
        out.write(" ".join(f"{k}={v}" for k, v in fields) + "\n")
    else:
        width = max(len(k) for k, _ in fields)
        out.write("".join(f"{k.ljust(width)} = {v}\n" for k, v in fields))
    return EXIT_OK


COMMANDS = {"plan": _cmd_plan, "simulate": _cmd_simulate,
            "analyze": _cmd_analyze, "power": _cmd_power}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except (ParseError, InvalidConfig, DegeneratePredictions, ValueError) as exc:
        print(f"dcqe: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ReportIOError) as exc:
        print(f"dcqe: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DcqeError as exc:
        print(f"dcqe: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
