"""Command line interface: ``nsmpc run``, ``nsmpc compare`` and ``nsmpc check``."""
import argparse
import logging
import sys

import yaml

from . import bench
from .checks import run_checks
from .exceptions import ConfigError, ConvergenceError

DEFAULT_EPSILON = 1e-2


def _raw_config(args):
    if not args.config:
        return {}
    with open(args.config) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{args.config}: top level must be a mapping")
    return data


def _cmd_run(args):
    data = _raw_config(args)
    method = args.method or data.get("method", bench.PROPOSED)
    data["method"] = method
    if args.epsilon is not None:
        data["epsilon"] = args.epsilon
    if method == bench.PROPOSED:
        data.pop("epsilon", None)
    elif data.get("epsilon") is None:
        data["epsilon"] = DEFAULT_EPSILON
    cfg = bench.config_from_dict(data, out_dir=args.out)
    result = bench.run_experiment(cfg)
    if result.trace is None:
        print(f"initialization failed: {result.message}", file=sys.stderr)
        return result.exit_code
    print(bench.summary(result.trace))
    if result.message:
        print(result.message, file=sys.stderr)
    return result.exit_code


def _cmd_compare(args):
    data = _raw_config(args)
    epsilon = args.epsilon if args.epsilon is not None else data.pop("epsilon", None) or DEFAULT_EPSILON
    data.pop("epsilon", None)
    data["method"] = bench.PROPOSED
    cfg = bench.config_from_dict(data, out_dir=None)
    proposed, conventional = bench.paired_configs(cfg, epsilon=epsilon)
    try:
        comp = bench.compare_methods(proposed, conventional, out_dir=args.out)
    except ConvergenceError as exc:
        print(str(exc), file=sys.stderr)
        return bench.EXIT_INIT
    print(f"median residual ratio (proposed / conventional) over the final half: {comp.median_final_half:.3e}")
    return bench.EXIT_OK


def _cmd_check(args):
    return 0 if run_checks(seed=args.seed) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="nsmpc", description="Continuation MPC with nonsmooth regularizers")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one closed-loop experiment")
    run.add_argument("--config")
    run.add_argument("--method", choices=[bench.PROPOSED, bench.CONVENTIONAL])
    run.add_argument("--epsilon", type=float, help="smoothing parameter (conventional method)")
    run.add_argument("--out", help="directory for trace CSV files")
    run.set_defaults(func=_cmd_run)

    cmp_ = sub.add_parser("compare", help="run proposed and conventional methods and compare residuals")
    cmp_.add_argument("--config")
    cmp_.add_argument("--epsilon", type=float)
    cmp_.add_argument("--out", required=True)
    cmp_.set_defaults(func=_cmd_compare)

    check = sub.add_parser("check", help="run the built-in property and oracle checks")
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_cmd_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        field = f" [{exc.field}]" if exc.field else ""
        print(f"config error{field}: {exc}", file=sys.stderr)
        return bench.EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return bench.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
