"""Command-line front end.

Exit status: 0 on success, 1 on bad arguments or an invalid scenario, 2 when a
solver run did not converge (its reports are still written and flagged).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .analysis import frontier, welfare_loss
from .economics import gradient_check
from .model import BiasProfile, ModelError, Scenario, evaluate
from .scenario_io import load_scenario, write_report
from .solver import SolverError, grid_oracle, optimize

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2

SUBCOMMANDS = ("evaluate", "optimize", "welfare-loss", "frontier", "gradcheck", "oracle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default; 2 is reserved for non-convergence here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _caps(text: str) -> list[float | None]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if token == "inf":
            out.append(None)
            continue
        try:
            out.append(float(token))
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"expected comma-separated numbers or 'inf', got {token!r}") from None
    return out


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = _nonneg_int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected an integer >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biascost",
                     description="Welfare cost of biased emergency-resource allocation.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND",
                                parser_class=_Parser)
    helps = {
        "evaluate": "evaluate one bias profile (baselines unless --d/--a given)",
        "optimize": "maximise the planner objective over data quality and fairness",
        "welfare-loss": "welfare lost at the baseline profile versus no bias",
        "frontier": "objective versus health-disparity cap",
        "gradcheck": "compare analytic and central-difference gradients",
        "oracle": "brute-force lattice search (at most 3 groups)",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name])
        p.add_argument("--scenario", required=True, metavar="PATH", help="scenario JSON file")
        p.add_argument("--out", metavar="DIR",
                       help="directory for report files (default: standard output)")
        p.add_argument("--format", choices=("json", "csv"), default="json",
                       help="report format (default: json)")
        p.add_argument("--seed", type=_nonneg_int, metavar="N",
                       help="override the scenario's solver seed")
        if name in ("optimize", "frontier"):
            p.add_argument("--workers", type=_positive_int, default=1, metavar="N",
                           help="threads for parallel multi-start runs (default: 1)")
        if name == "oracle":
            p.add_argument("--grid-step", type=float, default=0.05, metavar="X",
                           help="lattice spacing (default: 0.05)")
        if name == "frontier":
            p.add_argument("--caps", type=_caps, default=[0.0, 0.1, 0.5, None], metavar="a,b,inf",
                           help="ascending disparity caps; 'inf' means no cap "
                                "(default: 0,0.1,0.5,inf)")
        if name in ("evaluate", "gradcheck"):
            p.add_argument("--d", type=_floats, metavar="v1,v2,...",
                           help="data-quality level per group (one value broadcasts)")
            p.add_argument("--a", type=_floats, metavar="v1,v2,...",
                           help="fairness level per group (one value broadcasts)")
    return parser


def _per_group(values: list[float] | None, n: int, flag: str, default: list[float]) -> list[float]:
    if values is None:
        return default
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise UsageError(f"{flag}: expected 1 or {n} values, got {len(values)}")
    return values


def _probe_level(baseline: float) -> float:
    # Midway to 1, kept clear of the upper bound and of the baseline kink.
    level = 0.5 * (baseline + 1.0)
    if 1.0 - level < 1e-3:
        level = baseline - 1e-2
    return level


def _profile(args, scenario: Scenario, *, probe: bool) -> BiasProfile:
    n = scenario.n_groups
    if probe:
        d0 = [_probe_level(g.d_baseline) for g in scenario.groups]
        a0 = [_probe_level(g.a_baseline) for g in scenario.groups]
    else:
        d0 = [g.d_baseline for g in scenario.groups]
        a0 = [g.a_baseline for g in scenario.groups]
    return BiasProfile(_per_group(args.d, n, "--d", d0), _per_group(args.a, n, "--a", a0))


def _emit(report, args, stem: str) -> None:
    if args.out is None:
        write_report(report, args.format)
        return
    os.makedirs(args.out, exist_ok=True)
    write_report(report, args.format, os.path.join(args.out, f"{stem}.{args.format}"))


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario)
        if args.seed is not None:
            scenario = dataclasses.replace(
                scenario, solver=dataclasses.replace(scenario.solver, seed=args.seed))
        return _dispatch(args, scenario)
    except (ModelError, UsageError, SolverError, ValueError) as exc:
        print(f"biascost: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"biascost: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def _dispatch(args, scenario: Scenario) -> int:
    cmd = args.command
    if cmd == "evaluate":
        _emit(evaluate(scenario, _profile(args, scenario, probe=False)), args, "evaluate")
        return EXIT_OK
    if cmd == "gradcheck":
        report = gradient_check(scenario, _profile(args, scenario, probe=True))
        _emit(report, args, "gradcheck")
        if args.out is not None:
            print(f"max_rel_error={report.max_rel_error:.17g}")
        return EXIT_OK
    if cmd == "welfare-loss":
        _emit(welfare_loss(scenario), args, "welfare_loss")
        return EXIT_OK
    if cmd == "oracle":
        _emit(grid_oracle(scenario, args.grid_step), args, "oracle")
        return EXIT_OK
    if cmd == "optimize":
        report = optimize(scenario, workers=args.workers)
        _emit(report, args, "optimize")
        if not report.converged:
            print("biascost: warning: optimizer did not converge", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        return EXIT_OK
    if cmd == "frontier":
        points = frontier(scenario, args.caps, workers=args.workers)
        _emit(points, args, "frontier")
        stalled = [p.disparity_cap for p in points if not p.converged]
        if stalled:
            caps = ", ".join("inf" if c is None else f"{c:g}" for c in stalled)
            print(f"biascost: warning: no convergence at cap(s) {caps}", file=sys.stderr)
            return EXIT_NOT_CONVERGED
        return EXIT_OK
    raise AssertionError(cmd)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
