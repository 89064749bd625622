# app/api/cmd_analyze.py - `analyze`: scaling-tensor diagnostics for a finished run

from app.services.report_service import analyze_run, locate_run


def register(subparsers, parents):
    parser = subparsers.add_parser("analyze", parents=parents,
                                   help="layer usage, divergence, hardness and strongest paths")
    parser.add_argument("run_dir", nargs="?", default=None,
                        help="run directory written by `run` (default: the one --config writes to)")
    parser.epilog = "--out replaces <run_dir>/analysis, --seed keeps the cells trained from that seed"
    parser.set_defaults(handler=handle)
    return parser


def handle(args) -> int:
    run_dir = locate_run(args.run_dir, args.config)
    for report in analyze_run(run_dir, out_dir=args.out, seed=args.seed, workers=args.workers or 1):
        paths = ", ".join(f"task {t}: {p}" for t, p in report["strongest_paths"].items())
        print(
            f"{report['cell']}: hardness {report['initial_hardness']:.4f} -> {report['final_hardness']:.4f}, "
            f"divergence {report['initial_divergence']:.4f} -> {report['final_divergence']:.4f}; {paths}"
        )
    return 0
