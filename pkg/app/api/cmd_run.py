# app/api/cmd_run.py - `run`: execute an experiment config

import logging

from app.core.exceptions import ConfigError
from app.schemas.experiment import load_experiment_config
from app.services.experiment_service import apply_overrides, run_directory, run_experiment

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser("run", parents=parents,
                                   help="run every (ordering mode x trial) cell of an experiment")
    parser.add_argument("--export-data", action="store_true", help="also dump every cell's datasets as JSON lines")
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> int:
    if args.config is None:
        raise ConfigError("run needs --config")
    config = load_experiment_config(args.config)
    config = apply_overrides(config, out_dir=args.out, seed=args.seed, workers=args.workers)
    summary = run_experiment(config, export_data=args.export_data)
    print(f"run directory: {run_directory(config)}")
    for cell in summary.get("cells", []):
        acc = "-" if cell["accuracy_mean"] is None else f"{cell['accuracy_mean']:.4f} +- {cell['accuracy_std']:.4f}"
        print(f"{cell['mode']:>9} {cell['axis']}={cell['value']:<6} accuracy {acc}  loss {cell['loss_mean']:.6f}")
    if "max_residual" in summary:
        print(f"max trace residual: {summary['max_residual']:.3e}")
    return 0
