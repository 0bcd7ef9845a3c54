import argparse
import logging
import sys

from mcrelab import enable_debug_log
from mcrelab.interface import McreLabException
from mcrelab.parallel.pool import default_threads
from mcrelab.cli.config import load_config, resolve_seed, resolve_output
from mcrelab.cli.commands import COMMANDS, CommandRunner


EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def build_argument_parser():
    parser = argparse.ArgumentParser(
        prog="mcre-lab",
        description="Verify assumptions and run convergence experiments for Markov chains in random environments.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--seed", type=int, default=None,
                        help="64-bit unsigned master seed (default: config seed, then $MCRE_LAB_SEED, then 0)")
    parser.add_argument("--out", default=None, help="Output directory (default: config output, then ./mcre-out)")
    parser.add_argument("--threads", type=int, default=default_threads(), help="Worker threads")
    parser.add_argument("--emit-plots", action="store_true", help="Write a plot spec next to every CSV")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    return parser


def run(argv=None):
    """
    :return: Exit status: 0 when every check passes, 1 on an assumption or
             experiment failure, 2 on usage, config or unsupported requests
    :rtype: int
    """
    args = build_argument_parser().parse_args(argv)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    if args.verbose:
        enable_debug_log()

    try:
        config = load_config(args.config)
        seed = resolve_seed(args.seed, config)
        output = resolve_output(args.out, config)
        with CommandRunner(config, seed, output, args.threads, args.emit_plots) as runner:
            report = runner.run(args.command)
    except McreLabException as e:
        CommandRunner.logger.error("%s: %s", args.command, e)
        return EXIT_USAGE

    print(report.summary())
    return EXIT_PASS if report.passed else EXIT_FAIL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
