#!/usr/bin/env python3
"""Command-line surface: recover, unique, ksets, sweep, report and plot."""
import argparse
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

ROOT_DIR = Path(__file__).resolve().parent.parent
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from lib.lp_core import LPError
from lib.randgen import DistributionSpec
from src.experiment import SweepMode, fit_report, level_set, run_sweep, slices, transition_points, transition_width
from src.ksets import DEFAULT_CAP, PointCloud, compare_kset_estimators, convex_polygon, count_ksets, estimate_expected_ksets
from src.plotting import PlotSpec, render_plot
from src.recovery import FORMULATION_ALIASES, SparseBinarySignal, check_success, recover, support_signal
from src.results_io import (
    load_sweep_config,
    read_matrix,
    read_results_table,
    read_vector,
    write_fit_report,
    write_level_sets,
    write_pairs,
    write_results_table,
    write_run_manifest,
)
from src.uniqueness import (
    CertificateError,
    is_unique_solution,
    mangasarian_unique_l1_box,
    optimal_face_unique,
)

logger = logging.getLogger("binlp")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_PARTIAL = 3

DEFAULT_CONFIG = ROOT_DIR / "config" / "sweep.yaml"
DEFAULT_LEVELS = (0.1, 0.5, 0.9)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"error: {message}\n")


def _levels(text: str) -> Tuple[float, ...]:
    try:
        values = tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level list {text!r}")
    if not values or any(not (0 < v < 1) for v in values):
        raise argparse.ArgumentTypeError(f"levels must lie in (0, 1), got {text!r}")
    return values


def _random_cloud(text: str) -> Tuple[str, int, int]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected dist,m,n, got {text!r}")
    try:
        return DistributionSpec.parse(parts[0]).name, int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _indices(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated indices, got {text!r}")


def _emit(record: Dict[str, Any]) -> None:
    print(json.dumps(record, sort_keys=True))


def _as_list(values) -> Optional[List[float]]:
    return None if values is None else [float(v) for v in values]


def cmd_recover(args: argparse.Namespace) -> int:
    A = read_matrix(args.matrix)
    b = read_vector(args.rhs)
    result = recover(args.formulation, A, b)
    record: Dict[str, Any] = {
        "formulation": result.formulation.value,
        "status": result.status.value,
        "x_hat": _as_list(result.x_hat),
        "objective": result.objective,
    }
    if result.y_hat is not None:
        record["y_hat"] = _as_list(result.y_hat)
    if args.truth:
        truth = SparseBinarySignal.from_vector(read_vector(args.truth))
        record["success"] = check_success(result.x_hat, truth, args.tol)
    _emit(record)
    return EXIT_OK


def cmd_unique(args: argparse.Namespace) -> int:
    A = read_matrix(args.matrix)
    truth = support_signal(A.shape[1], args.support)
    verdict = is_unique_solution(A, truth)
    record: Dict[str, Any] = {"verdict": "Unique" if verdict.is_unique else "NotUnique", "k": truth.k}
    if verdict.is_unique:
        certificate = verdict.certificate
        record.update(normal=_as_list(certificate.normal), offset=certificate.offset, margin=certificate.margin)
    else:
        record.update(alpha0=_as_list(verdict.witness.alpha0), alpha1=_as_list(verdict.witness.alpha1))
    if args.cross_check:
        b = A @ truth.binary_vector()
        record["lp_direction_test"] = mangasarian_unique_l1_box(A, truth)
        record["optimal_face_test"] = optimal_face_unique(A, b, x_bar=truth.binary_vector())
    _emit(record)
    return EXIT_OK


def cmd_ksets(args: argparse.Namespace) -> int:
    if args.random:
        dist, m, n = args.random
        if args.compare_recovery:
            report = compare_kset_estimators(dist, m, n, args.k, args.trials, args.seed)
            _emit(
                {
                    "distribution": dist,
                    "m": m,
                    "n": n,
                    "k": args.k,
                    "trials": args.trials,
                    "recovery_prob": report.recovery.mean,
                    "recovery_stderr": report.recovery.stderr,
                    "augmented_ratio": report.augmented.mean,
                    "augmented_gap": report.augmented_gap,
                    "augmented_pooled_stderr": report.augmented_stderr,
                    "literal_ratio": report.literal.mean,
                    "literal_gap": report.literal_gap,
                    "literal_pooled_stderr": report.literal_stderr,
                }
            )
            return EXIT_OK
        report = estimate_expected_ksets(dist, m, n, args.k, args.trials, args.seed, args.origin, args.cap)
        _emit(
            {
                "distribution": dist,
                "m": m,
                "n": n,
                "k": args.k,
                "trials": args.trials,
                "origin": args.origin,
                "count": report.count,
                "mean": report.estimate.mean,
                "stderr": report.estimate.stderr,
                "ratio": report.ratio_estimate.mean,
                "ratio_stderr": report.ratio_estimate.stderr,
            }
        )
        return EXIT_OK

    if args.compare_recovery:
        raise ValueError("--compare-recovery needs --random")
    cloud = convex_polygon(args.polygon) if args.polygon else PointCloud(read_matrix(args.cloud))
    report = count_ksets(cloud, args.k, args.origin, args.cap, collect=args.collect)
    record: Dict[str, Any] = {"n": report.n, "k": report.k, "origin": args.origin, "count": report.count, "ratio": report.ratio}
    if args.collect:
        record["subsets"] = [list(s) for s in report.subsets]
    _emit(record)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        raise ValueError("--jobs must be at least 1")
    config = load_sweep_config(args.config)
    out = Path(args.out)
    started = time.perf_counter()
    cells = run_sweep(config, jobs=args.jobs)
    elapsed = time.perf_counter() - started
    errored = sum(1 for cell in cells if cell.error)

    table = write_results_table(str(out / "results.csv"), config, cells)
    manifest = write_run_manifest(str(out / "run_manifest.json"), config, elapsed, args.jobs, errored)
    print(f"Saved results table to {table}")
    print(f"Saved run manifest to {manifest}")
    if errored:
        print(f"error: {errored} cell(s) failed; see the error column of {table}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    _, config, cells = read_results_table(args.table)
    out = Path(args.out) if args.out else Path(args.table).resolve().parent
    out.mkdir(parents=True, exist_ok=True)
    if args.fit and config.mode is not SweepMode.ETA_DELTA:
        raise ValueError("--fit needs a table swept in EtaDelta mode")

    grouped = sorted(slices(cells).items())
    entries = [(form, dist, level_set(group, target, config.mode)) for (form, dist), group in grouped for target in args.levels]
    written = [write_level_sets(str(out / "level_sets.csv"), entries)]

    if config.mode is SweepMode.ETA_DELTA:
        written.append(
            write_pairs(
                str(out / "transition_points.csv"),
                ["formulation", "distribution", "eta", "delta_star"],
                ([form, dist, eta, delta] for (form, dist), group in grouped for eta, delta in transition_points(group)),
            )
        )
    written.append(
        write_pairs(
            str(out / "transition_width.csv"),
            ["formulation", "distribution", "abscissa", "width"],
            ([form, dist, x, width] for (form, dist), group in grouped for x, width in transition_width(group, config.mode)),
        )
    )
    if args.fit:
        written.extend(write_fit_report(str(out), [(form, dist, fit_report(group)) for (form, dist), group in grouped]))

    for path in written:
        print(f"Saved {path}")
    return EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    _, config, cells = read_results_table(args.table)
    spec = PlotSpec(
        mode=config.mode,
        levels=args.levels,
        conjecture=args.fit,
        cs_bound=args.cs_bound,
        formulations=tuple(args.formulation) if args.formulation else None,
        distributions=tuple(args.distribution) if args.distribution else None,
    )
    if args.title:
        spec.title = args.title
    path = render_plot(cells, spec, args.out)
    print(f"Saved plot to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="binlp", description="Binary sparse recovery by LP relaxation.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for solver detail")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    p = commands.add_parser("recover", help="solve one recovery LP")
    p.add_argument("--matrix", required=True, help="CSV matrix A with a header line")
    p.add_argument("--rhs", required=True, help="CSV vector b with a header line")
    p.add_argument("--formulation", default="l1box", choices=sorted(FORMULATION_ALIASES))
    p.add_argument("--truth", help="CSV 0/1 vector; adds a success verdict")
    p.add_argument("--tol", type=float, default=1e-9, help="relative success tolerance")
    p.set_defaults(handler=cmd_recover)

    p = commands.add_parser("unique", help="certify uniqueness of a binary solution")
    p.add_argument("--matrix", required=True)
    p.add_argument("--support", required=True, type=_indices, help="comma-separated 0-based support, e.g. 0,3,4")
    p.add_argument("--cross-check", action="store_true", help="also run the direction and optimal-face tests")
    p.set_defaults(handler=cmd_unique)

    p = commands.add_parser("ksets", help="count or estimate k-sets")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--cloud", help="CSV point cloud, one point per row")
    source.add_argument("--random", type=_random_cloud, metavar="DIST,M,N", help="columns of random m x n matrices")
    source.add_argument("--polygon", type=int, metavar="N", help="N points in convex position")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--origin", action="store_true", help="add the origin to the complement side")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest C(n, k) to enumerate")
    p.add_argument("--collect", action="store_true", help="list the separable subsets")
    p.add_argument("--compare-recovery", action="store_true", help="estimate recovery probability alongside E[X]/C(n,k)")
    p.set_defaults(handler=cmd_ksets)

    p = commands.add_parser("sweep", help="run a Monte Carlo phase-transition sweep")
    p.add_argument("--config", default=str(DEFAULT_CONFIG))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(handler=cmd_sweep)

    p = commands.add_parser("report", help="level sets, transition points and fit report")
    p.add_argument("--table", required=True)
    p.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS)
    p.add_argument("--fit", action="store_true", help="compare transition points with H(eta)/2")
    p.add_argument("--out", help="output directory (default: next to the table)")
    p.set_defaults(handler=cmd_report)

    p = commands.add_parser("plot", help="SVG chart of level sets")
    p.add_argument("--table", required=True)
    p.add_argument("--out", required=True, help="SVG file to write")
    p.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS)
    p.add_argument("--fit", action="store_true", help="draw the H(eta)/2 curve")
    p.add_argument("--cs-bound", action="store_true", help="draw the k log2(n/k)/n curve")
    p.add_argument("--formulation", action="append", help="restrict to a formulation (repeatable)")
    p.add_argument("--distribution", action="append", help="restrict to a distribution (repeatable)")
    p.add_argument("--title")
    p.set_defaults(handler=cmd_plot)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        # LPInputError is a ValueError: bad input, not a numerical failure
        logger.debug("input failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LPError, CertificateError) as exc:
        logger.debug("numerical failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
