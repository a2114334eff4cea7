"""Command line entry point: ``adagrad-fejer {run|diagnose|counterexample|verify-all}``.

Exit status: 0 success / all checks pass, 1 a verdict failed, 2 usage or
input error, 3 numerical abort (partial output is still written).

Any flag may also come from a plain ``key=value`` file given with
``--config``; flags on the command line take precedence. Problem parameters
use ``param.<name>=value`` in the file and ``--param name=value`` on the
command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import acceptance
from .adagrad import run
from .counterexample import MAX_K, run_counterexample
from .fejer import diagnose
from .objective import PROBLEMS, ObjectiveProblem, get_problem, starting_points
from .trajectory import ALGORITHMS, TrajectoryFormatError, read_csv, write_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ABORT = 0, 1, 2, 3


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _vector(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _param_value(text: str):
    parts = [t.strip() for t in text.split(",")]
    values = []
    for t in parts:
        try:
            values.append(int(t))
        except ValueError:
            values.append(float(t))
    return values if len(values) > 1 else values[0]


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        cfg[key.replace("-", "_")] = value
    return cfg


def _add_problem_args(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--problem", required=required, default=None if required else "quad1d",
                   help=f"corpus problem: {', '.join(PROBLEMS)}")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="problem parameter override (repeatable; comma-separated vectors)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adagrad-fejer", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    parser.commands = {}

    p = parser.commands["run"] = sub.add_parser("run", help="run an optimizer and write its trajectory CSV")
    p.add_argument("--config", help="key=value configuration file")
    _add_problem_args(p, required=False)
    p.add_argument("--algo", choices=ALGORITHMS, default="adagrad-norm")
    p.add_argument("--x0", type=_vector, default=None, help="start point, comma-separated (scalar broadcasts)")
    p.add_argument("--delta", type=_positive_float, default=1.0)
    p.add_argument("--iters", type=_positive_int, default=1000, help="maximum number of logged iterations")
    p.add_argument("--stop-grad-tol", type=_nonneg_float, default=0.0)
    p.add_argument("--eta", type=_positive_float, default=None, help="gradient descent step (default 1/L)")
    p.add_argument("--out", default="trajectory.csv")

    p = parser.commands["diagnose"] = sub.add_parser("diagnose", help="check a trajectory CSV and write a JSON report and SVG plots")
    p.add_argument("trajectory")
    p.add_argument("--config", help="key=value configuration file")
    _add_problem_args(p, required=False)
    p.add_argument("--delta", type=_positive_float, required=False, default=None)
    p.add_argument("--algo", choices=ALGORITHMS, default=None, help="override algorithm detection")
    p.add_argument("--tail", type=_positive_int, default=acceptance.TAIL)
    p.add_argument("--tol", type=_positive_float, default=None, help="convergence tolerance (default 1e-4)")
    p.add_argument("--report", default="report.json")
    p.add_argument("--plots", default="plots", help="directory for SVG plots ('' to skip)")

    p = parser.commands["counterexample"] = sub.add_parser("counterexample", help="rebuild the divergent 1-D AdaGrad sequence")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--K", type=int, default=12)
    p.add_argument("--csv", default="cx.csv")
    p.add_argument("--certificate", default="cx_certificate.json")

    p = parser.commands["verify-all"] = sub.add_parser("verify-all", help="run the full acceptance matrix")
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.add_argument("--iters", type=_positive_int, default=acceptance.ITERS)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        params = [f"{k[6:]}={v}" for k, v in cfg.items() if k.startswith("param.")]
        cfg = {k: v for k, v in cfg.items() if not k.startswith("param.")}
        subparser = parser.commands[args.command]
        unknown = set(cfg) - {a.dest for a in subparser._actions}
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        subparser.set_defaults(**cfg)
        args = parser.parse_args(argv)
        # later entries win, so command-line --param overrides the file
        args.param = params + args.param
    args._parser = parser
    return args


def _resolve_problem(args) -> ObjectiveProblem:
    params = {}
    for item in args.param:
        if "=" not in item:
            args._parser.error(f"--param expects NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        params[name.strip()] = _param_value(value)
    try:
        return get_problem(args.problem, **params)
    except KeyError as exc:
        args._parser.error(str(exc.args[0]))
    except (TypeError, ValueError) as exc:
        args._parser.error(f"bad parameters for problem {args.problem!r}: {exc}")


def cmd_run(args) -> int:
    p = _resolve_problem(args)
    if args.x0 is None:
        x0 = starting_points(p)[0]
    else:
        x0 = np.asarray(args.x0, dtype=float)
        if x0.size == 1:
            x0 = np.full(p.dimension, x0[0])
        if x0.shape != (p.dimension,):
            args._parser.error(f"--x0 needs {p.dimension} values for problem {p.name!r}")
    traj = run(p, args.algo, x0, args.delta, args.iters, args.stop_grad_tol, eta=args.eta)
    write_csv(traj, args.out)
    if len(traj):
        gnorm = float(np.linalg.norm(traj.g[-1]))
        print(f"{p.name} {args.algo}: iterations={len(traj)} final F={traj.F[-1]:.6e} final |g|={gnorm:.6e}")
    if traj.aborted:
        print(f"numerical abort: {traj.error}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_diagnose(args) -> int:
    if args.delta is None:
        args._parser.error("diagnose requires --delta")
    p = _resolve_problem(args)
    try:
        traj = read_csv(args.trajectory, args.delta, args.algo)
    except (OSError, TrajectoryFormatError) as exc:
        print(f"cannot read trajectory: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if traj.dimension != p.dimension:
        print(f"trajectory has dimension {traj.dimension}, problem {p.name!r} has {p.dimension}", file=sys.stderr)
        return EXIT_USAGE
    report = diagnose(traj, p, tail=args.tail, tol=args.tol)
    Path(args.report).write_text(report.to_json(indent=1))
    if args.plots:
        from .plots import plot_report

        plot_report(report, args.plots, title=f"{p.name} {traj.algo} delta={traj.delta:g}")
    for v in report.verdicts:
        status = "n/a " if not v.available else ("PASS" if v.passed else "FAIL")
        print(f"[{status}] {v.name} {v.detail}".rstrip())
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_counterexample(args) -> int:
    if not 2 <= args.K <= MAX_K:
        args._parser.error(f"--K must be between 2 and {MAX_K}")
    cx = run_counterexample(args.K)
    cx.write_csv(args.csv)
    cert = cx.certificate()
    Path(args.certificate).write_text(json.dumps(cert, indent=1))
    for v in cx.verdicts:
        print(f"[{'PASS' if v.passed else 'FAIL'}] {v.name} {v.detail}".rstrip())
    last = cert["oscillation"][-1]
    print(f"oscillation at k={last['k']}: observed {last['observed']:.6f}, predicted {last['predicted']:.6f}")
    return EXIT_OK if cx.passed else EXIT_FAIL


def cmd_verify_all(args) -> int:
    rows = acceptance.verify_all(seed=args.seed, jobs=args.jobs, iters=args.iters)
    for row in rows:
        print(row.line())
    failed = sum(not r.passed for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} criteria passed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


COMMANDS = {
    "run": cmd_run,
    "diagnose": cmd_diagnose,
    "counterexample": cmd_counterexample,
    "verify-all": cmd_verify_all,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
