"""Command-line front end for the experiment harness.

Subcommands mirror the experiment stages: ``generate`` samples a scenario
bundle from a JSON config, ``design`` runs the pilot optimization at one
error budget, ``sweep`` repeats it over an epsilon grid and aggregates,
``verify`` re-checks stored pilots, and ``report`` emits histogram CSVs.

Exit codes: 0 success; 1 I/O or configuration error; 2 solver failures
occurred; 3 post-threshold budget violations occurred.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import harness

__all__ = ["main"]


def _parse_grid(text: str):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad epsilon grid {text!r}: {exc}")
    if not values:
        raise argparse.ArgumentTypeError("epsilon grid is empty")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pilotseq",
        description="Minimum-length pilot design experiments for correlated multi-user MIMO.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="sample geometries and covariance factors")
    gen.add_argument("--config", required=True, help="scenario config JSON path")
    gen.add_argument("--out", required=True, help="output bundle directory")
    gen.add_argument("--realizations", type=int, default=None, help="override realization count")
    gen.add_argument("--seed", type=int, default=None, help="override master seed")
    gen.add_argument("--csv", action="store_true", help="also export matrices as CSV")

    des = sub.add_parser("design", help="design pilots for every realization at one epsilon")
    des.add_argument("--bundle", required=True, help="bundle directory from `generate`")
    des.add_argument("--epsilon", type=float, required=True, help="error budget")
    des.add_argument("--threads", type=int, default=1)
    des.add_argument(
        "--unscaled-pilots",
        action="store_true",
        help="emit bare eigenvector rows instead of sqrt-eigenvalue-scaled rows",
    )
    des.add_argument("--csv", action="store_true", help="also export pilot matrices as CSV")

    swp = sub.add_parser("sweep", help="design over an epsilon grid and aggregate")
    swp.add_argument("--bundle", required=True)
    swp.add_argument(
        "--epsilon-grid",
        type=_parse_grid,
        default=None,
        help="comma-separated budgets (default: grid from the scenario config)",
    )
    swp.add_argument("--threads", type=int, default=1)

    ver = sub.add_parser("verify", help="re-check stored pilots")
    ver.add_argument("--bundle", required=True)
    ver.add_argument("--epsilon", type=float, required=True)
    ver.add_argument(
        "--empirical-trials",
        type=int,
        default=0,
        help="Monte Carlo trials for an empirical error check (0 disables)",
    )

    rep = sub.add_parser("report", help="emit histogram CSVs for one design run")
    rep.add_argument("--bundle", required=True)
    rep.add_argument("--epsilon", type=float, required=True)
    rep.add_argument("--bins", type=int, default=20, help="error histogram bin count")
    return parser


def _cmd_generate(args) -> int:
    config = harness.ScenarioConfig.from_json(Path(args.config).read_text())
    if args.realizations is not None:
        config = replace(config, num_realizations=args.realizations)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    bundle = harness.generate_bundle(config, args.out, csv_export=args.csv)
    print(f"wrote {config.num_realizations} realizations to {bundle}")
    return 0


def _records_exit_code(records) -> int:
    # non-convergence counts as a solver-side failure for exit purposes
    if any(r.status != "ok" or not r.converged for r in records):
        return 2
    if any(not r.within_budget for r in records):
        return 3
    return 0


def _cmd_design(args) -> int:
    records = harness.design_bundle(
        args.bundle,
        args.epsilon,
        threads=args.threads,
        unscaled_pilots=args.unscaled_pilots,
        csv_export=args.csv,
    )
    ok = [r for r in records if r.status == "ok"]
    failed = len(records) - len(ok)
    if ok:
        mean_len = sum(r.pilot_length for r in ok) / len(ok)
        print(
            f"epsilon={args.epsilon:g}: {len(ok)} designs, mean L={mean_len:.3f}, "
            f"{failed} solver failures"
        )
    else:
        print(f"epsilon={args.epsilon:g}: all {failed} realizations failed")
    return _records_exit_code(records)


def _cmd_sweep(args) -> int:
    path = harness.sweep_bundle(args.bundle, args.epsilon_grid, threads=args.threads)
    print(f"wrote {path}")
    config = harness.load_config(args.bundle)
    grid = args.epsilon_grid if args.epsilon_grid is not None else config.epsilon_grid
    failures = violations = 0
    for epsilon in grid:
        ddir = Path(args.bundle) / "designs" / f"eps_{harness.eps_tag(epsilon)}"
        for line in (ddir / "runs.csv").read_text().strip().splitlines()[1:]:
            parts = line.split(",")
            if parts[13] != "ok" or parts[10] == "0":
                failures += 1
            elif parts[12] == "0":
                violations += 1
    if failures:
        return 2
    return 3 if violations else 0


def _cmd_verify(args) -> int:
    rows = harness.verify_bundle(
        args.bundle, args.epsilon, empirical_trials=args.empirical_trials
    )
    violations = [r for r in rows if not r["within_budget"]]
    bound_misses = [r for r in rows if not r["bound_ok"]]
    print(
        f"verified {len(rows)} realizations: {len(violations)} budget violations, "
        f"{len(bound_misses)} noiseless-bound misses (soft check)"
    )
    return 3 if violations else 0


def _cmd_report(args) -> int:
    summary = harness.report_bundle(args.bundle, args.epsilon, bins=args.bins)
    print(json.dumps(summary, indent=2))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "design": _cmd_design,
        "sweep": _cmd_sweep,
        "verify": _cmd_verify,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
