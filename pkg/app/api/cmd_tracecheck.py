# app/api/cmd_tracecheck.py - `tracecheck`: cyclic-product trace identities on random or given matrices

import json
import logging
from pathlib import Path

import numpy as np

from app.core.exceptions import ConfigError, ContractError, DataFormatError, SingularityError
from app.core.rng import Rng
from app.schemas.experiment import ExperimentKind, load_experiment_config
from app.services.analysis_service import product_diagnostic, random_matrices, trace_diagnostic
from app.services.experiment_service import apply_overrides, run_directory, run_experiment
from app.utils.files import write_json_atomic

logger = logging.getLogger(__name__)


def register(subparsers, parents):
    parser = subparsers.add_parser("tracecheck", parents=parents,
                                   help="check the trace constraints of cyclic products")
    parser.add_argument("--T", type=int, default=3, help="number of matrices")
    parser.add_argument("--m", type=int, default=4, help="matrix size")
    parser.add_argument("--with-scalars", action="store_true", help="also compute the scalar chain")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--matrices", default=None,
                        help='JSON file: a list of G matrices, or {"G": [...]} / {"F": [...]}')
    parser.epilog = ("--config runs a trace-check experiment over its (T, m) grid, spread over --workers; "
                     "--out receives tracecheck.json (or the experiment run directory)")
    parser.set_defaults(handler=handle)
    return parser


def load_matrices(path):
    """(kind, matrices) where kind is "G" (factors) or "F" (products)"""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"matrix file not found: {path}", field="matrices")
    except json.JSONDecodeError as e:
        raise DataFormatError(f"line {e.lineno} column {e.colno}: {e.msg}", field="matrices")
    kind = "G"
    if isinstance(raw, dict):
        if len(raw) != 1 or next(iter(raw)) not in ("G", "F"):
            raise DataFormatError('expected exactly one of the keys "G" or "F"', field="matrices")
        kind, raw = next(iter(raw.items()))
    try:
        return kind, [np.array(m, dtype=np.float64) for m in raw]
    except (TypeError, ValueError):
        raise DataFormatError("matrices must be nested lists of numbers", field="matrices")


def run_config(args) -> int:
    config = load_experiment_config(args.config)
    if config.kind is not ExperimentKind.TRACE_CHECK:
        raise ConfigError(f"tracecheck --config needs a trace-check experiment, got {config.kind.value}")
    config = apply_overrides(config, out_dir=args.out, seed=args.seed, workers=args.workers)
    summary = run_experiment(config)
    if args.json:
        print(json.dumps({"run_dir": str(run_directory(config)), "max_residual": summary["max_residual"],
                          "max_normalized_residual": summary["max_normalized_residual"]}, sort_keys=True))
        return 0
    print(f"run directory: {run_directory(config)}")
    print(f"max trace residual: {summary['max_residual']:.3e}")
    return 0


def handle(args) -> int:
    if args.config:
        return run_config(args)
    if args.matrices:
        kind, matrices = load_matrices(args.matrices)
    else:
        if args.T < 2 or args.m < 1:
            raise ContractError(f"tracecheck needs T >= 2 and m >= 1, got T={args.T} m={args.m}")
        seed = 0 if args.seed is None else args.seed
        kind, matrices = "G", random_matrices(args.T, args.m, Rng(seed))

    try:
        if kind == "G":
            diagnostic = trace_diagnostic(matrices, args.with_scalars)
        else:
            diagnostic = product_diagnostic(matrices, args.with_scalars)
    except SingularityError as e:
        if args.json:
            print(json.dumps({"error": "singularity", "index": e.index, "detail": e.detail}))
        raise

    payload = diagnostic.to_dict()
    if args.out:
        path = write_json_atomic(Path(args.out) / "tracecheck.json", payload)
        logger.info(f"wrote {path}")
    if args.json:
        print(json.dumps(payload, sort_keys=True))
        return 0
    print(f"T={payload['T']} m={payload['m']}")
    print("traces: " + " ".join(f"{t:.12g}" for t in payload["traces"]))
    print(f"residual: {payload['residual']:.3e}")
    if payload["scalars"] is not None:
        print("scalars: " + " ".join(f"{s:.12g}" for s in payload["scalars"]))
        print(f"normalized residual: {payload['normalized_residual']:.3e}")
    return 0
