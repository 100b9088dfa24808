"""
Command-line entry point: one subcommand per experiment, plus `all`.

Exit codes: 0 every assertion passed, 1 an assertion failed or a check
raised, 2 usage or configuration error.
"""
import argparse
import logging
import sys

from .config import RESOLUTIONS, Config, ExperimentConfig
from .errors import ConfigError
from .experiments import EXPERIMENTS
from .runner import ExperimentRunner

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="divmeasure",
                                     description="Numerical checks for divergence-measure fields")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="ini file with [grid], [shape], [field], ... sections")
    common.add_argument("--out", help="output directory (default: [output] directory, then DIVMEASURE_OUTPUT_DIR)")
    common.add_argument("--resolution", choices=sorted(RESOLUTIONS),
                        help="override h and the epsilon schedule with a preset")
    common.add_argument("--seed", type=int, default=None, help="seed for random spot-check lattices")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(EXPERIMENTS) + ["all"]:
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args):
    if args.config:
        config = ExperimentConfig.from_file(args.config)
        resolution = args.resolution
    else:
        config = ExperimentConfig()
        resolution = args.resolution or Config.RESOLUTION
    if resolution:
        config = config.apply_resolution(resolution)
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        Config().validate()
        logging.basicConfig(level=Config.LOG_LEVEL, format="%(asctime)s %(name)s %(levelname)s %(message)s")
        config = load_config(args)
        runner = ExperimentRunner(config, out_dir=args.out, seed=args.seed)
        if args.command == "all":
            runner.run_all()
        else:
            runner.run(args.command)
    except ConfigError as e:
        print(f"❌ Configuration Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_PASS if runner.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
