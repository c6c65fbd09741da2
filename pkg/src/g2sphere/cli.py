"""CLI interface for g2sphere."""

import argparse
import csv
import json
import logging
import math
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from importlib.metadata import version
from pathlib import Path
from typing import IO, Any

import numpy as np

from g2sphere.config import Settings
from g2sphere.connection import (
    ansatz_div_norm_sq,
    ansatz_divergence,
    div_full_torsion,
    divergence_invariant_sym,
    exterior_part_general,
)
from g2sphere.exceptions import G2Error, UnsupportedCaseError, UsageError
from g2sphere.flow import FlowState, ansatz_critical_class, integrate
from g2sphere.params import AnsatzParams, AnyParams, G2Params, GeneralParams, dump_params, load_params
from g2sphere.stability import classify_critical, classify_many, hessian_closed, hessian_numeric
from g2sphere.structures import metric_from_params
from g2sphere.torsion import ansatz_norm_sq, closed_form_ansatz, closed_form_general, regimes, torsion
from g2sphere.verify import CHECKS, run_suite

# ANSI color codes
RED = "\033[31m"
GREEN = "\033[32m"
DIM = "\033[2m"
BOLD = "\033[1m"
RESET = "\033[0m"

logger = logging.getLogger(__name__)

SCAN_HEADER = ("r", "h2", "energy", "div_norm", "class")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports errors as UsageError instead of exiting."""

    def error(self, message: str):
        raise UsageError(message)


def print_table(headers: list[str], rows: list[list[str]]) -> None:
    """Print a simple aligned table."""
    if not rows:
        return

    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(str(cell)))

    header_row = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    print(f"{BOLD}{header_row}{RESET}")
    print("-" * (len(header_row) + len(headers) * 2))
    for row in rows:
        print("  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)))


def report_error(code: str, detail: object) -> None:
    """One machine-parsable line on stderr: ERROR <code> <detail>."""
    print(f"ERROR {code} {' '.join(str(detail).split())}", file=sys.stderr)


def _floats(text: str, count: int) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {text!r}") from e
    if len(values) != count:
        raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers, got {len(values)}")
    return values


def quaternion_arg(text: str) -> tuple[float, ...]:
    return _floats(text, 4)


def matrix_arg(text: str) -> tuple[tuple[float, ...], ...]:
    values = _floats(text, 9)
    return values[0:3], values[3:6], values[6:9]


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from e
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from e
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def params_from_args(args: argparse.Namespace) -> AnyParams:
    """Build the parameter model named by the family flags or --params.

    Raises:
        UsageError: If the flags for the chosen family are incomplete
        ParameterDomainError: If the values are outside the admissible domain
    """
    if args.params:
        try:
            payload = json.loads(Path(args.params).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"Cannot read parameters from {args.params}: {e}") from e
        if not isinstance(payload, dict):
            raise UsageError(f"{args.params} must hold a JSON object")
        return load_params(payload)

    if args.family == "ansatz":
        if args.r is None:
            raise UsageError("--ansatz needs --r")
        return AnsatzParams.create(r=args.r, h=args.h)
    if args.family == "general":
        missing = [f"--{name}" for name in ("r1", "r2", "r3") if getattr(args, name) is None]
        if missing:
            raise UsageError(f"--general needs {' '.join(missing)}")
        return GeneralParams.create(r1=args.r1, r2=args.r2, r3=args.r3, h=args.h, convention=args.convention)
    if args.family == "g2params":
        if args.a is None or args.D is None:
            raise UsageError("--g2params needs --a and --D")
        return G2Params.create(a=args.a, D=args.D)
    raise UsageError("Choose one of --ansatz, --general, --g2params or --params PATH")


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


@contextmanager
def output_stream(path: str | None) -> Iterator[IO[str]]:
    """--out PATH or stdout."""
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", newline="") as stream:
        yield stream


def emit_json(payload: Any, path: str | None) -> None:
    with output_stream(path) as stream:
        json.dump(payload, stream, sort_keys=True, indent=2, default=_json_default)
        stream.write("\n")


def cmd_torsion(args: argparse.Namespace) -> int:
    """Print the torsion forms, full torsion tensor and |T|^2."""
    params = params_from_args(args)
    if args.closed_form:
        if isinstance(params, AnsatzParams):
            data = closed_form_ansatz(params)
            div = ansatz_divergence(params)
        elif isinstance(params, GeneralParams):
            data = closed_form_general(params)
            div = exterior_part_general(params) + divergence_invariant_sym(data.tau27, metric_from_params(params))
        else:
            raise UnsupportedCaseError("Closed forms exist for --ansatz and --general parameters only")
    else:
        data = torsion(params)
        div = div_full_torsion(params).value
    payload = data.to_json()
    # div T lies in span(e^1, e^2, e^3)
    payload["divT"] = [float(x) for x in div[:3]]
    payload["regimes"] = regimes(data)
    payload["params"] = dump_params(params)
    emit_json(payload, args.out)
    return 0


def cmd_flow(args: argparse.Namespace) -> int:
    """Integrate the isometric flow and write the trajectory."""
    settings: Settings = args.settings
    params = params_from_args(args)
    if not isinstance(params, (AnsatzParams, GeneralParams)):
        raise UnsupportedCaseError("The flow needs --ansatz or --general parameters")

    t_max = settings.flow_t_max if args.t_max is None else args.t_max
    if args.backward:
        t_max = -t_max
    trajectory = integrate(
        FlowState.start(params), t_max=t_max, dt=args.dt, settings=settings, sample_every=args.sample_every
    )
    if trajectory.converged_at is not None:
        logger.info("|div T| settled below tolerance at t=%.6g", trajectory.converged_at)

    if args.format == "json":
        emit_json(
            {
                "params": dump_params(params),
                "t": trajectory.t,
                "m": trajectory.m,
                "energy": trajectory.energy,
                "div_norm": trajectory.div_norm,
                "converged_at": trajectory.converged_at,
                "dt": trajectory.metadata["dt"],
            },
            args.out,
        )
    else:
        with output_stream(args.out) as stream:
            trajectory.write_csv(stream)
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    """Print the critical set containing the given point."""
    critical = classify_critical(params_from_args(args), args.settings)
    emit_json(critical.to_json(), args.out)
    return 0


def cmd_hessian(args: argparse.Namespace) -> int:
    """Print the reduced Hessian report at a critical point."""
    params = params_from_args(args)
    compute = hessian_numeric if args.numeric else hessian_closed
    emit_json(compute(params, args.settings).to_json(), args.out)
    return 0


def _scan_grid(args: argparse.Namespace) -> tuple[np.ndarray, np.ndarray]:
    settings: Settings = args.settings
    r_min = settings.scan_r_min if args.r_min is None else args.r_min
    r_max = settings.scan_r_max if args.r_max is None else args.r_max
    if r_min >= r_max:
        raise UsageError(f"--r-min ({r_min}) must be smaller than --r-max ({r_max})")
    r_steps = settings.scan_r_steps if args.r_steps is None else args.r_steps
    rs = np.linspace(r_min, r_max, r_steps)
    if args.h2 is not None:
        if not -1.0 <= args.h2 <= 1.0:
            raise UsageError(f"--h2 must lie in [-1, 1], got {args.h2}")
        return rs, np.array([args.h2])
    h2_steps = settings.scan_h2_steps if args.h2_steps is None else args.h2_steps
    return rs, np.linspace(0.0, 1.0, h2_steps)


def cmd_scan(args: argparse.Namespace) -> int:
    """Sweep the Ansatz family over r (and h2) with energy, |div T| and class."""
    rs, h2s = _scan_grid(args)
    points = [
        AnsatzParams.create(r=float(r), h=(math.sqrt(max(0.0, 1.0 - h2**2)), 0.0, float(h2), 0.0))
        for r in rs
        for h2 in h2s
    ]
    if args.exact:
        labels = classify_many([p.to_general() for p in points], jobs=args.jobs or args.settings.jobs)
    else:
        labels = [ansatz_critical_class(p.r, p.quaternion) for p in points]

    rows = []
    for p, label in zip(points, labels):
        h2 = float(p.h[2])
        div_norm = math.sqrt(max(0.0, ansatz_div_norm_sq(p.r, h2)))
        rows.append({"r": p.r, "h2": h2, "energy": ansatz_norm_sq(p.r, h2), "div_norm": div_norm, "class": label})

    if args.format == "json":
        emit_json(rows, args.out)
        return 0
    with output_stream(args.out) as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(SCAN_HEADER)
        for row in rows:
            writer.writerow([*(f"{row[k]:.17g}" for k in SCAN_HEADER[:4]), row["class"]])
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    """Run the acceptance checks and report each by name."""
    if args.list:
        print_table(["Check", "Description"], [[name, (fn.__doc__ or "").strip()] for name, fn in CHECKS.items()])
        return 0

    settings: Settings = args.settings
    jobs = args.jobs or settings.jobs
    print(f"{BOLD}Running {len(args.check or CHECKS)} check(s){RESET} {DIM}(seed {args.seed}, jobs {jobs}){RESET}\n")
    results = run_suite(names=args.check, seed=args.seed, scale=args.scale, jobs=jobs, settings=settings)

    for result in results:
        mark = f"{GREEN}✓{RESET}" if result.passed else f"{RED}✗{RESET}"
        print(f"  {mark} {result.name} {DIM}({result.seconds:.2f}s){RESET} {result.detail}")

    failed = [r for r in results if not r.passed]
    if failed:
        print(f"\n{RED}{len(failed)} of {len(results)} check(s) failed:{RESET} {', '.join(r.name for r in failed)}")
        return 1
    print(f"\n{GREEN}All {len(results)} checks passed{RESET}")
    return 0


def _add_param_arguments(parser: argparse.ArgumentParser) -> None:
    family = parser.add_mutually_exclusive_group()
    family.add_argument("--ansatz", dest="family", action="store_const", const="ansatz", help="Ansatz family (r, h)")
    family.add_argument(
        "--general", dest="family", action="store_const", const="general", help="General family (r1, r2, r3, h)"
    )
    family.add_argument("--g2params", dest="family", action="store_const", const="g2params", help="Raw (a, D)")
    family.add_argument("--params", metavar="PATH", help="JSON file with the parameter schema")
    parser.add_argument("--r", type=float, help="Ansatz scale r > 0")
    parser.add_argument("--r1", type=float, help="First radius (general family)")
    parser.add_argument("--r2", type=float, help="Second radius (general family)")
    parser.add_argument("--r3", type=float, help="Third radius (general family)")
    parser.add_argument(
        "--h",
        type=quaternion_arg,
        default=(1.0, 0.0, 0.0, 0.0),
        metavar="H0,H1,H2,H3",
        help="Unit quaternion (default: 1,0,0,0)",
    )
    parser.add_argument(
        "--convention",
        choices=["intro", "general"],
        default="general",
        help="Radius convention of the general family (default: general)",
    )
    parser.add_argument("--a", type=positive_float, help="Scale a > 0 (g2params)")
    parser.add_argument("--D", type=matrix_arg, metavar="D11,...,D33", help="Row-major 3x3 matrix (g2params)")


def _add_output_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", "-o", metavar="PATH", help="Write output to PATH instead of stdout")


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the g2 CLI."""
    parser = _Parser(
        prog="g2",
        description="g2 - Torsion, flow and stability of invariant G2-structures on the 7-sphere",
    )
    parser.add_argument(
        "--version",
        "-V",
        action="version",
        version=f"%(prog)s {version('g2sphere')}",
    )
    parser.add_argument("--verbose", "-v", action="count", default=0, help="Log progress (-vv for debug)")
    subparsers = parser.add_subparsers(dest="command", required=True, help="Command")

    # torsion
    torsion_parser = subparsers.add_parser("torsion", help="Torsion forms, full torsion and |T|^2 as JSON")
    _add_param_arguments(torsion_parser)
    torsion_parser.add_argument(
        "--closed-form", action="store_true", help="Evaluate the closed forms instead of exterior calculus"
    )
    _add_output_argument(torsion_parser)
    torsion_parser.set_defaults(func=cmd_torsion)

    # flow
    flow_parser = subparsers.add_parser("flow", help="Integrate the isometric flow")
    _add_param_arguments(flow_parser)
    flow_parser.add_argument("--t-max", type=positive_float, help="Flow time (default: settings.flow_t_max)")
    flow_parser.add_argument("--dt", type=positive_float, help="RK4 step (default: settings.flow_dt)")
    flow_parser.add_argument("--backward", action="store_true", help="Integrate toward negative time")
    flow_parser.add_argument("--sample-every", type=positive_int, default=1, help="Record every n-th step (default: 1)")
    flow_parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format (default: csv)")
    _add_output_argument(flow_parser)
    flow_parser.set_defaults(func=cmd_flow)

    # classify
    classify_parser = subparsers.add_parser("classify", help="Critical set containing a point")
    _add_param_arguments(classify_parser)
    _add_output_argument(classify_parser)
    classify_parser.set_defaults(func=cmd_classify)

    # hessian
    hessian_parser = subparsers.add_parser("hessian", help="Reduced Hessian at a critical point")
    _add_param_arguments(hessian_parser)
    hessian_parser.add_argument("--numeric", action="store_true", help="Finite differences instead of closed form")
    _add_output_argument(hessian_parser)
    hessian_parser.set_defaults(func=cmd_hessian)

    # scan
    scan_parser = subparsers.add_parser("scan", help="Sweep the Ansatz family over r and h2")
    scan_parser.add_argument("--r-min", type=positive_float, help="Smallest r (default: settings.scan_r_min)")
    scan_parser.add_argument("--r-max", type=positive_float, help="Largest r (default: settings.scan_r_max)")
    scan_parser.add_argument("--r-steps", type=positive_int, help="Number of r values (default: settings)")
    scan_parser.add_argument("--h2", type=float, help="Fix h2 instead of sweeping [0, 1]")
    scan_parser.add_argument("--h2-steps", type=positive_int, help="Number of h2 values (default: settings)")
    scan_parser.add_argument(
        "--exact", action="store_true", help="Classify from first-principles |div T| instead of closed forms"
    )
    scan_parser.add_argument("--jobs", "-j", type=positive_int, help="Workers for --exact (default: G2_JOBS or 1)")
    scan_parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Output format (default: csv)")
    _add_output_argument(scan_parser)
    scan_parser.set_defaults(func=cmd_scan)

    # verify
    verify_parser = subparsers.add_parser("verify", help="Run the acceptance checks")
    verify_parser.add_argument(
        "--check", "-c", action="append", choices=sorted(CHECKS), metavar="NAME", help="Run only NAME (repeatable)"
    )
    verify_parser.add_argument("--list", action="store_true", help="List the available checks")
    verify_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    verify_parser.add_argument(
        "--scale", type=positive_float, default=1.0, help="Multiplier for randomized sample counts (default: 1.0)"
    )
    verify_parser.add_argument("--jobs", "-j", type=positive_int, help="Worker processes (default: G2_JOBS or 1)")
    verify_parser.set_defaults(func=cmd_verify)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def run(argv: list[str] | None = None) -> int:
    """Parse argv, run the command and return the exit code.

    Exit codes: 0 on success, 1 when verify reports failures, 2 on argument
    or configuration errors, 3 on domain errors.
    """
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        report_error(e.code, e)
        return 2
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else 0

    _configure_logging(args.verbose)
    try:
        args.settings = Settings.from_env()
    except ValueError as e:
        report_error("CONFIG", e)
        return 2

    try:
        return args.func(args)
    except UsageError as e:
        report_error(e.code, e)
        return 2
    except G2Error as e:
        report_error(e.code, e)
        return 3


def main():
    """Main entry point for CLI."""
    sys.exit(run())


if __name__ == "__main__":
    main()
