"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 dependency error,
4 data error. Partial battery failures are not fatal (fault isolation).
"""

from __future__ import annotations

import argparse
import json
import sys

import pandas as pd

from .errors import (
    ConfigurationError, DataError, DependencyError, EopanelError,
)
from .pipeline import Pipeline, STAGES
from .regress import INPUT_COLUMNS, load_panel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_DATA = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eopanel")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute pipeline stages")
    run.add_argument("--config", required=True, help="pipeline config JSON")
    run.add_argument("--stage", default="all", choices=("all",) + STAGES)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--seed", type=int, default=None,
                     help="overrides every seed in the config")
    run.add_argument("--force", action="store_true",
                     help="ignore stage caches and recompute")
    run.add_argument("--blind", action="store_true",
                     help="anonymize product labels in battery outputs")
    run.add_argument("--unblind", metavar="MAPFILE", default=None,
                     help="restore product labels using a blinding map file")
    run.add_argument("--out", required=True, help="output directory")

    summary = sub.add_parser("panel-summary", help="per-country panel summary table")
    summary.add_argument("panel", help="panel CSV path")
    return parser


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            config = json.load(fh)
    except FileNotFoundError:
        print(f"config not found: {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        print(f"config does not parse: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.blind and args.unblind:
        print("--blind and --unblind are mutually exclusive", file=sys.stderr)
        return EXIT_CONFIG
    pipe = Pipeline(
        config, args.out, workers=args.workers, seed=args.seed,
        force=args.force, blind_products=args.blind,
    )
    if args.unblind:
        pipe.unblind(args.unblind)
        return EXIT_OK
    pipe.run(args.stage)
    failures = pipe.out / "battery" / "failures.csv"
    if failures.exists():
        n_failed = max(0, sum(1 for _ in open(failures)) - 1)
        if n_failed:
            print(f"battery: {n_failed} spec(s) failed, see {failures}")
    return EXIT_OK


def cmd_panel_summary(args) -> int:
    panel = load_panel(args.panel)
    blocks = {"farm_value": "outcome_value_usd_ha", "primary_yield": "outcome_yield_kg_ha"}
    rows = []
    for country, grp in panel.groupby("country_id", sort=True):
        for block, outcome_col in blocks.items():
            row = {
                "country": country,
                "block": block,
                "n_obs": len(grp),
                "n_households": grp["household_id"].nunique(),
                "outcome_mean": grp[outcome_col].mean(),
                "outcome_sd": grp[outcome_col].std(ddof=1) if len(grp) > 1 else 0.0,
            }
            for col in INPUT_COLUMNS:
                row[f"{col}_mean"] = grp[col].mean()
                row[f"{col}_sd"] = grp[col].std(ddof=1) if len(grp) > 1 else 0.0
            rows.append(row)
    pd.DataFrame(rows).to_csv(sys.stdout, index=False)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "panel-summary":
            return cmd_panel_summary(args)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (DataError, EopanelError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
