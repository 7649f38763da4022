"""Command-line entry point.

Subcommands: validate, optimize, sweep, bench-learning, serve. Every
command is deterministic given --seed, and every output file embeds the
seed, the sha256 of the input config(s) and the tool version (never a
timestamp, so identical invocations produce identical bytes).

Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
FAREOPT_LOG sets the log level; FAREOPT_BACKEND picks the kernel backend.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .equilibrium import (
    EquilibriumError,
    OptimizationError,
    OptimizationRequest,
    SolutionReport,
    optimize_fares,
    pareto_sweep,
)
from .network import ConfigError, file_sha256, load_network, network_to_dict
from .population import load_population
from .synthetic import BenchResult, run_learning_benchmark

log = logging.getLogger("fareopt")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the interface contract wants 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_(EXIT_USAGE, f"{self.prog}: error: {message}")


class SystemExit_(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code
        self.message = message


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _gamma(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"gamma must be in [0, 1], got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fareopt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fareopt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("validate", help="validate a network config file")
    p.add_argument("config", help="network JSON path")

    def common(p, gamma: bool):
        p.add_argument("--config", required=True, help="network JSON path")
        p.add_argument("--population", required=True, help="population JSON path")
        if gamma:
            p.add_argument("--gamma", type=_gamma, required=True)
        else:
            p.add_argument("--gamma-grid", required=True,
                           help="comma-separated gamma values, e.g. 0,0.25,0.5,0.75,1")
        p.add_argument("--starts", type=_positive_int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=_positive_int, default=None,
                       help="parallel starts (default: available cores)")
        p.add_argument("--x-max", type=float, default=50.0)
        p.add_argument("--out", default=None, help="output file (default: stdout)")

    p = sub.add_parser("optimize", help="optimize taxi fares for one gamma")
    common(p, gamma=True)
    p.add_argument("--format", choices=("json",), default="json")

    p = sub.add_parser("sweep", help="trace the latency/risk Pareto frontier over gamma")
    common(p, gamma=False)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("bench-learning",
                       help="active-vs-random synthetic-user learning benchmark")
    p.add_argument("--users", type=_positive_int, default=50)
    p.add_argument("--active", type=int, default=10)
    p.add_argument("--holdout", type=_positive_int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pool-size", type=_positive_int, default=1000)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("serve", help="run the survey service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", default=None, help="survey config JSON")
    p.add_argument("--data-dir", default=None, help="session storage directory")

    return parser


def _write_output(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text)
        log.info("wrote %s", out)


def _report_dict(report: SolutionReport, meta: dict) -> dict:
    return {
        "v": 1,
        **meta,
        "gamma": report.gamma,
        "fares": report.fares.tolist(),
        "objective": report.objective,
        "latency_total": report.latency_total,
        "risk_total": report.risk_total,
        "rail_penalty": report.rail_penalty,
        "flows": {
            "car": report.flows.car_flows.tolist(),
            "taxi": report.flows.taxi_flows.tolist(),
            "rail": report.flows.rail_flow,
            "walk": report.flows.walk_flow,
            "total": report.flows.total(),
        },
        "options": {
            "names": list(report.option_names),
            "latency": report.option_attributes[:, 0].tolist(),
            "cost": report.option_attributes[:, 1].tolist(),
            "risk": report.option_attributes[:, 2].tolist(),
        },
        "equilibrium": {
            "iterations": report.equilibrium_iterations,
            "residual": report.equilibrium_residual,
        },
        "n_starts": report.n_starts,
        "x_max": report.x_max,
        "failed_starts": list(report.failed_start_indices),
        "starts": [
            {
                "start": s.start_index,
                "x0": s.x0.tolist(),
                "fares": s.fares.tolist(),
                "objective": float(s.objective) if np.isfinite(s.objective) else None,
                "evaluations": s.n_evaluations,
                "equilibrium_failures": s.equilibrium_failures,
                "converged": bool(s.converged),
            }
            for s in report.starts
        ],
    }


def _summary_table(report: SolutionReport) -> str:
    lines = [
        f"gamma={report.gamma:g}  objective={report.objective:.3f}  "
        f"L={report.latency_total:.3f}  R={report.risk_total:.3f}",
        f"{'option':<8}{'fare/cost':>10}{'latency':>10}{'risk':>10}{'flow':>12}",
    ]
    flows = np.concatenate([
        report.flows.car_flows, report.flows.taxi_flows,
        [report.flows.rail_flow] if "rail" in report.option_names else [],
        [report.flows.walk_flow] if "walk" in report.option_names else [],
    ])
    for name, attrs, flow in zip(report.option_names, report.option_attributes, flows):
        lines.append(f"{name:<8}{attrs[1]:>10.2f}{attrs[0]:>10.2f}{attrs[2]:>10.2f}{flow:>12.3f}")
    return "\n".join(lines)


def cmd_validate(args) -> int:
    try:
        config = load_network(args.config)
    except FileNotFoundError:
        print(f"error: no such file: {args.config}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as err:
        for problem in err.problems:
            print(problem, file=sys.stderr)
        print(f"{len(err.problems)} problem(s) found", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(network_to_dict(config), indent=2, sort_keys=True))
    return EXIT_OK


def _load_inputs(args):
    config = load_network(args.config)
    population = load_population(args.population)
    meta = {
        "tool_version": __version__,
        "seed": args.seed,
        "config_sha256": file_sha256(args.config),
        "population_sha256": file_sha256(args.population),
    }
    return config, population, meta


def _request(args, gamma: float) -> OptimizationRequest:
    threads = args.threads if args.threads else max(1, os.cpu_count() or 1)
    return OptimizationRequest(
        gamma=gamma, n_starts=args.starts, x_max=args.x_max,
        seed=args.seed, threads=threads,
    )


def cmd_optimize(args) -> int:
    config, population, meta = _load_inputs(args)
    report = optimize_fares(_request(args, args.gamma), config, population)
    _write_output(json.dumps(_report_dict(report, meta), indent=2, sort_keys=True) + "\n",
                  args.out)
    if args.out is not None:
        print(_summary_table(report))
    return EXIT_OK


def _sweep_csv(points, config, meta: dict) -> str:
    n = config.n_roads
    buffer = io.StringIO()
    for key in ("tool_version", "seed", "config_sha256", "population_sha256"):
        buffer.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    header = (
        ["gamma", "L", "R"]
        + [f"fare_{i + 1}" for i in range(n)]
        + [f"flow_car_{i + 1}" for i in range(n)]
        + [f"flow_taxi_{i + 1}" for i in range(n)]
        + ["flow_rail", "flow_walk", "status"]
    )
    writer.writerow(header)
    for point in points:
        if point.report is None:
            writer.writerow([point.gamma] + [""] * (len(header) - 2) + [f"error: {point.error}"])
            continue
        r = point.report
        writer.writerow(
            [point.gamma, repr(float(r.latency_total)), repr(float(r.risk_total))]
            + [repr(float(x)) for x in r.fares]
            + [repr(float(x)) for x in r.flows.car_flows]
            + [repr(float(x)) for x in r.flows.taxi_flows]
            + [repr(float(r.flows.rail_flow)), repr(float(r.flows.walk_flow)), "ok"]
        )
    return buffer.getvalue()


def cmd_sweep(args) -> int:
    config, population, meta = _load_inputs(args)
    try:
        gammas = [_gamma(part) for part in args.gamma_grid.split(",") if part.strip() != ""]
    except (ValueError, argparse.ArgumentTypeError) as err:
        print(f"error: bad --gamma-grid: {err}", file=sys.stderr)
        return EXIT_USAGE
    if not gammas:
        print("error: --gamma-grid is empty", file=sys.stderr)
        return EXIT_USAGE
    points = pareto_sweep(gammas, config, population, _request(args, gammas[0]))
    if args.format == "csv":
        _write_output(_sweep_csv(points, config, meta), args.out)
    else:
        doc = {
            "v": 1, **meta,
            "points": [
                {"gamma": p.gamma,
                 **({"report": _report_dict(p.report, {})} if p.report else {"error": p.error})}
                for p in points
            ],
        }
        _write_output(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    failures = sum(1 for p in points if p.report is None)
    return EXIT_NUMERICAL if failures == len(points) else EXIT_OK


def _bench_csv(result: BenchResult, meta: dict) -> str:
    buffer = io.StringIO()
    for key, value in meta.items():
        buffer.write(f"# {key}={value}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["user", "accuracy_active", "accuracy_random"])
    for row in result.rows:
        writer.writerow([row.user, repr(float(row.accuracy_active)), repr(float(row.accuracy_random))])
    writer.writerow([])
    writer.writerow(["mean", repr(float(result.mean_active)), repr(float(result.mean_random))])
    writer.writerow(["p_value_one_sided", repr(float(result.p_value)), ""])
    writer.writerow(["chance_level", repr(float(result.chance_level)), ""])
    return buffer.getvalue()


def cmd_bench_learning(args) -> int:
    if args.active < 0:
        print("error: --active must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    from .synthetic import SessionProtocol

    result = run_learning_benchmark(
        n_users=args.users, n_active=args.active, n_holdout=args.holdout,
        seed=args.seed,
        protocol=SessionProtocol(pool_size=args.pool_size),
    )
    meta = {"tool_version": __version__, "seed": args.seed,
            "users": args.users, "active": args.active, "holdout": args.holdout}
    if args.format == "csv":
        _write_output(_bench_csv(result, meta), args.out)
    else:
        doc = {
            "v": 1, **meta,
            "rows": [
                {"user": r.user, "accuracy_active": r.accuracy_active,
                 "accuracy_random": r.accuracy_random}
                for r in result.rows
            ],
            "mean_active": result.mean_active,
            "mean_random": result.mean_random,
            "p_value_one_sided": result.p_value,
            "chance_level": result.chance_level,
        }
        _write_output(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
    print(
        f"active {result.mean_active:.3f} vs random {result.mean_random:.3f} "
        f"(p={result.p_value:.4f}, chance {result.chance_level:.3f})",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import SurveyService, create_app, load_survey_config

    try:
        config = load_survey_config(args.config, args.data_dir)
    except (FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    app = create_app(SurveyService(config))
    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    except SystemExit as err:  # uvicorn exits nonzero when the port is taken
        return EXIT_USAGE if err.code else EXIT_OK
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FAREOPT_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit_ as err:
        print(err.message, file=sys.stderr)
        return err.code
    try:
        if args.command == "validate":
            return cmd_validate(args)
        if args.command == "optimize":
            return cmd_optimize(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "bench-learning":
            return cmd_bench_learning(args)
        if args.command == "serve":
            return cmd_serve(args)
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as err:
        for problem in err.problems:
            print(problem, file=sys.stderr)
        return EXIT_USAGE
    except (EquilibriumError, OptimizationError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
