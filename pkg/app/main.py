# app/main.py - Command-line entry point: python -m app.main <command> ...

import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import SoftOrderError
from app.schemas.experiment import experiment_json_schema

# Commands
from app.api import cmd_analyze, cmd_run, cmd_sweep, cmd_tracecheck

logger = logging.getLogger("app")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def handle_schema(args) -> int:
    """Print the published ExperimentConfig JSON schema"""
    print(json.dumps(experiment_json_schema(), indent=2, sort_keys=True))
    return 0


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def common_options() -> argparse.ArgumentParser:
    """--config/--out/--seed/--workers, shared by every experiment command"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="experiment config (JSON)")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="seed (overrides the config)")
    common.add_argument("--workers", type=positive_int, default=None, help="concurrent workers (overrides the config)")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softorder",
        description="multitask learning with parallel, permuted and soft layer ordering",
    )
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG level")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = [common_options()]

    # Register commands
    cmd_run.register(subparsers, common)
    cmd_analyze.register(subparsers, common)
    cmd_sweep.register(subparsers, common)
    cmd_tracecheck.register(subparsers, common)

    schema = subparsers.add_parser("schema", help="print the experiment config JSON schema")
    schema.set_defaults(handler=handle_schema)
    return parser


def configure_logging(verbose: bool = False):
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except SoftOrderError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error(f"validation failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"unexpected failure: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
