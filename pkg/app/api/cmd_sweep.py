# app/api/cmd_sweep.py - `sweep`: render a layer's effect across scale values

from app.core.exceptions import ContractError
from app.services.report_service import locate_run, sweep_run, trial_for_seed


def register(subparsers, parents):
    parser = subparsers.add_parser("sweep", parents=parents,
                                   help="sweep one layer's scale in a trained pixel-viz model")
    parser.add_argument("run_dir", nargs="?", default=None,
                        help="pixel-viz run directory (default: the one --config writes to)")
    parser.add_argument("--task", type=int, default=0, help="0-based task index")
    parser.add_argument("--layer", type=int, default=0,
                        help="0-based core layer index, as in permutations and strongest paths")
    parser.add_argument("--depth", type=int, action="append", default=None,
                        help="1-based depth, as in analysis reports; repeatable (default: depths 1-3)")
    parser.add_argument("--steps", type=int, default=8, help="grid values; 1 means the trained scale")
    parser.add_argument("--trial", type=int, default=None, help="0-based trial (default 0)")
    parser.epilog = "--seed picks the trial trained from that seed, --out replaces <run_dir>/sweep"
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> int:
    run_dir = locate_run(args.run_dir, args.config)
    trial = args.trial
    if args.seed is not None:
        seeded = trial_for_seed(run_dir, args.seed)
        if trial is not None and trial != seeded:
            raise ContractError(f"--seed {args.seed} is trial {seeded}, not --trial {trial}")
        trial = seeded
    report = sweep_run(run_dir, args.task, args.layer, args.depth, args.steps, trial or 0,
                       out_dir=args.out, workers=args.workers or 1)
    print(f"{len(report['frames'])} frames for task {report['task']}, layer {report['layer']}, "
          f"depths {report['depths']} from {report['cell']}")
    return 0
