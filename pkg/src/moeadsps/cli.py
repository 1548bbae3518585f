"""Command line entry point: ``gen-instance``, ``run``, ``report`` and ``weights``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .experiment import REPORT_MODES, load_config, run_experiment, write_report
from .landscape import NkSpec, generate_instance, save_instance
from .scalarize import format_weights, generate_weights


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError(f"expected strictly ascending positive integers, got {text!r}")
    return values


def _cmd_gen_instance(args) -> int:
    spec = NkSpec(args.N, args.M, args.K, args.seed)
    data = save_instance(generate_instance(spec))
    Path(args.path).write_bytes(data)
    logging.info("wrote %s (%d bytes)", args.path, len(data))
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    changes = {}
    if args.output_dir is not None:
        changes["output_dir"] = str(args.output_dir)
    if args.checkpoints is not None:
        changes["checkpoints"] = args.checkpoints
    if args.budget is not None:
        changes["budget"] = args.budget
    if changes:
        config = dataclasses.replace(config, **changes)
    trace = run_experiment(config, workers=args.workers)
    print(trace)
    return 0


def _cmd_report(args) -> int:
    out_dir = Path(args.output_dir)
    traces = [Path(t) for t in args.traces] or [out_dir / "trace.csv"]
    dest = args.out or out_dir / f"report_{args.mode}.csv"
    path = write_report(traces, args.mode, dest, args.checkpoints, args.alpha)
    print(path)
    return 0


def _cmd_weights(args) -> int:
    text = format_weights(generate_weights(args.mu, args.M, args.method))
    if args.path:
        Path(args.path).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="moeadsps", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-instance", help="write an NK landscape instance file")
    p.add_argument("N", type=int)
    p.add_argument("M", type=int)
    p.add_argument("K", type=int)
    p.add_argument("seed", type=int)
    p.add_argument("path")
    p.set_defaults(func=_cmd_gen_instance)

    p = sub.add_parser("run", help="execute an experiment configuration")
    p.add_argument("config", help="JSON experiment configuration")
    p.add_argument("-o", "--output-dir", help="override the configured output directory")
    p.add_argument("-w", "--workers", type=int, help="worker processes (default: config, then CPU count)")
    p.add_argument("--checkpoints", type=_int_list, help="comma-separated evaluation checkpoints")
    p.add_argument("--budget", type=int, help="override the evaluation budget")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="summarize experiment traces")
    p.add_argument("output_dir", help="experiment output directory")
    p.add_argument("--mode", choices=REPORT_MODES, default="convergence")
    p.add_argument("--trace", dest="traces", action="append", default=[],
                   help="trace file(s) to combine (default: <output_dir>/trace.csv)")
    p.add_argument("--checkpoints", type=_int_list, help="restrict to these checkpoints")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level for ranks")
    p.add_argument("--out", help="destination CSV (default: <output_dir>/report_<mode>.csv)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("weights", help="print the weight vectors for (mu, M)")
    p.add_argument("mu", type=int)
    p.add_argument("M", type=int)
    p.add_argument("--method", choices=("lattice", "lowdisc"))
    p.add_argument("--path", help="write to a file instead of stdout")
    p.set_defaults(func=_cmd_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"moeadsps {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
