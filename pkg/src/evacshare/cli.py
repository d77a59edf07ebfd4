"""Command-line entry point.

Exit codes: 0 success, 1 validation failure (bad instance or infeasible
plan), 2 usage error.  Documents go to stdout or ``--out``; diagnostics and
status records go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from .exact import ExactConfig, solve_exact
from .experiment import (
    DEFAULT_RATIOS,
    DEFAULT_TMAXES,
    ConfigError,
    GenConfig,
    export_report,
    generate_instance,
    run_sweep,
)
from .instance import SchemaError, ValidationError, parse_instance, serialize_instance, validate
from .mip import MODES, STRENGTHENED, build_model, export_lp
from .oracle import LimitExceeded
from .plan import (
    NoUsedVehicles,
    Plan,
    UnknownId,
    average_travel_distance,
    check_feasibility,
    evacuation_percentage,
)
from .solve import METHODS, run_method

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


class _Usage(Exception):
    pass


class _Invalid(Exception):
    pass


def _read_text(path):
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise _Usage(f"cannot read {path}: {exc.strerror}") from None


def _instance(path, check=True):
    try:
        return parse_instance(_read_text(path), check=check)
    except (SchemaError, ValidationError) as exc:
        raise _Invalid(f"{path}: {exc}") from None


def _plan(path):
    try:
        return Plan.from_json(_read_text(path))
    except (ValueError, KeyError, TypeError) as exc:
        raise _Invalid(f"{path}: not a plan document ({exc})") from None


def _emit(text, out):
    """Write ``text`` to ``out`` atomically, or to stdout."""
    if not out or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    folder = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".evacshare-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _status(record):
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _number(text):
    # "9" stays an int so CLI output matches the library defaults byte for byte
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


def _csv_floats(text):
    try:
        return tuple(_number(t.strip()) for t in text.split(",") if t.strip())
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_ints(text):
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _csv_words(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


# ---------------------------------------------------------------------------
# commands


def cmd_solve(args):
    inst = _instance(args.instance)
    if args.method == "exact":
        cfg = ExactConfig(
            time_limit=args.time_limit,
            node_limit=args.node_limit,
            workers=args.workers,
            canonical=not args.any_optimum,
        )
        res = solve_exact(inst, cfg)
        plan, record = res.plan, res.status_record()
    else:
        try:
            plan, status = run_method(
                inst,
                args.method,
                time_limit=args.time_limit,
                node_limit=args.node_limit,
                workers=args.workers,
                seed=args.seed,
                max_iter=args.max_iter,
            )
        except LimitExceeded as exc:
            raise _Usage(f"instance too large for brute force: {exc}") from None
        record = {"status": status, "objective": plan.evacuated_total}
    _emit(plan.to_json(indent=2) + "\n", args.out)
    _status(record)
    return EXIT_OK


def cmd_validate(args):
    try:
        inst = parse_instance(_read_text(args.instance), check=False)
    except SchemaError as exc:
        print(f"SchemaError: {exc}")
        return EXIT_INVALID
    problems = [str(v) for v in validate(inst)]
    if not problems and args.plan:
        try:
            report = check_feasibility(inst, _plan(args.plan))
        except UnknownId as exc:
            problems = [f"UnknownId {exc.args[0]}"]
        else:
            problems = [str(v) for v in report.violations]
            for note in report.notes:
                print(f"note: {note}", file=sys.stderr)
    for line in problems:
        print(line)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_export_mip(args):
    inst = _instance(args.instance)
    _emit(export_lp(build_model(inst, args.mode)), args.out)
    return EXIT_OK


def _gen_config(args, **over):
    fields = dict(
        n_households=args.households,
        n_gathering=args.gathering,
        household_size=args.household_size,
        capacities=args.capacities,
        area=args.area,
        speed=args.speed,
        t_p=args.t_p,
        seed=args.seed,
    )
    fields.update(over)
    cfg = GenConfig(**fields)
    try:
        cfg.check()
    except ConfigError as exc:
        raise _Usage(str(exc)) from None
    return cfg


def cmd_gen(args):
    cfg = _gen_config(args, r_ratio=args.ratio, t_max=args.t_max)
    _emit(serialize_instance(generate_instance(cfg), indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args):
    for m in args.methods:
        if m not in METHODS:
            raise _Usage(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    for r in args.ratios:
        if not 0 < r < 1:
            raise _Usage(f"ratio must be in (0, 1), got {r}")
    base = _gen_config(args)
    report = run_sweep(
        base,
        ratios=args.ratios,
        t_maxes=args.tmaxes,
        methods=args.methods,
        workers=args.workers,
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        max_iter=args.max_iter,
        canonical=not args.any_optimum,
    )
    _emit(export_report(report, "csv"), args.out)
    if args.svg:
        _emit(export_report(report, "svg"), args.svg)
    bad = [r for r in report.rows if r.status.startswith("error")]
    _status({"cells": len(report.rows), "errors": len(bad)})
    return EXIT_OK


def cmd_metrics(args):
    inst = _instance(args.instance)
    plan = _plan(args.plan)
    try:
        report = check_feasibility(inst, plan)
    except UnknownId as exc:
        raise _Invalid(f"plan references unknown id {exc.args[0]}") from None
    if not report.ok:
        for v in report.violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    try:
        atd = average_travel_distance(inst, plan)
    except NoUsedVehicles:
        atd = None
    try:
        ep = evacuation_percentage(inst, plan)
    except ValueError as exc:
        raise _Invalid(str(exc)) from None
    _emit(json.dumps({"EP": ep, "ATD": atd}) + "\n", args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _add_gen_flags(p):
    g = GenConfig()
    p.add_argument("--seed", type=int, default=g.seed)
    p.add_argument("--households", type=_positive_int, default=g.n_households)
    p.add_argument("--gathering", type=_positive_int, default=g.n_gathering)
    p.add_argument("--household-size", type=int, default=g.household_size)
    p.add_argument("--capacities", type=_csv_ints, default=g.capacities, help="cycled over owners, e.g. 5,7")
    p.add_argument("--area", type=float, default=g.area, help="side of the square, miles")
    p.add_argument("--speed", type=float, default=g.speed, help="miles per minute")
    p.add_argument("--t-p", type=_number, default=g.t_p, help="boarding minutes per person")


def _add_solver_flags(p):
    p.add_argument("--time-limit", type=float, default=60.0, help="exact solver seconds")
    p.add_argument("--node-limit", type=_positive_int, default=10_000_000)
    p.add_argument("--max-iter", type=int, default=1000, help="local-search accepted moves")


def build_parser():
    parser = argparse.ArgumentParser(prog="evacshare", description="Ridesharing evacuation planning toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("solve", help="solve an instance and print the plan")
    p.add_argument("--instance", required=True, help="instance JSON ('-' for stdin)")
    p.add_argument("--method", choices=METHODS, default="exact")
    _add_solver_flags(p)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--seed", type=int, default=0, help="local-search scan order")
    p.add_argument(
        "--any-optimum", action="store_true", help="exact: skip the canonical tie-break among optimal plans"
    )
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="check an instance (and optionally a plan)")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-mip", help="write the MIP in LP format")
    p.add_argument("--instance", required=True)
    p.add_argument("--mode", choices=MODES, default=STRENGTHENED)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_mip)

    p = sub.add_parser("gen", help="generate a synthetic instance")
    _add_gen_flags(p)
    p.add_argument("--ratio", type=float, default=GenConfig().r_ratio, help="share of households owning a vehicle")
    p.add_argument("--t-max", type=_number, default=GenConfig().t_max)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sweep", help="ratio x deadline experiment")
    _add_gen_flags(p)
    p.add_argument("--ratios", type=_csv_floats, default=DEFAULT_RATIOS)
    p.add_argument("--tmaxes", type=_csv_floats, default=DEFAULT_TMAXES)
    p.add_argument("--methods", type=_csv_words, default=("heuristic",))
    _add_solver_flags(p)
    p.add_argument("--workers", type=_positive_int, default=1, help="cells solved in parallel")
    p.add_argument("--any-optimum", action="store_true", help="exact: skip the canonical tie-break")
    p.add_argument("--out", help="CSV report (stdout if omitted)")
    p.add_argument("--svg", help="also write the EP / ATD charts")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("metrics", help="EP and ATD of a plan")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _Usage as exc:
        print(f"evacshare: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _Invalid as exc:
        print(f"evacshare: invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
