"""Command-line entry point: ``btcdirection <stage> --config FILE [--out DIR] [--seed N]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .audit import LeakageError
from .config import ConfigError, json_schema, load_config
from .ingestion import ConfigurationError, EmptyRangeError, IntegrityError, SchemaError
from .models import HyperparameterError
from .sample import default_config_path
from .stages import STAGES, AuditViolation, DependencyError, run_stage

EXIT_OK, EXIT_VALIDATION, EXIT_DEPENDENCY, EXIT_AUDIT = 0, 2, 3, 4

log = logging.getLogger("btcdirection")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    p = argparse.ArgumentParser(prog="btcdirection", description="Bitcoin next-day direction pipeline.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*STAGES, "all"):
        sp = sub.add_parser(name, parents=[common], help="run every stage in order" if name == "all" else f"run the {name} stage")
        sp.add_argument("--config", type=Path, default=None, help="pipeline config (YAML or JSON); defaults to the bundled sample config")
        sp.add_argument("--out", type=Path, default=None, help="output directory (overrides config and $BTCDIRECTION_OUT)")
        sp.add_argument("--seed", type=int, default=None)
    sp = sub.add_parser("schema", parents=[common], help="print the config JSON schema")
    sp.add_argument("--output", type=Path, default=None)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "schema":
        text = json.dumps(json_schema(), indent=2, sort_keys=True) + "\n"
        if args.output:
            args.output.write_text(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    try:
        cfg = load_config(args.config or default_config_path(), seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    stages = STAGES if args.command == "all" else (args.command,)
    try:
        for stage in stages:
            path = run_stage(stage, cfg, args.out)
            print(path)
    except DependencyError as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (AuditViolation, LeakageError) as exc:
        print(f"audit violation: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except (ConfigurationError, SchemaError, IntegrityError, EmptyRangeError, HyperparameterError, KeyError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
