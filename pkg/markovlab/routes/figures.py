import argparse

import markovlab
from markovlab.routes.common import add_experiment_flags, experiment_config
from markovlab.services.experiments import run_experiment, write_result
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

HELP = {
    "fig1": "pi_Q against nu_q and nu_theta: scaled curves and TV decay",
    "fig2": "uniformity of pi_P and pi_Qhat: curve, TV decay, alpha sweep",
    "rate": "log-log slopes of the TV distances over the n grid",
}


def register(subparsers) -> None:
    for name, text in HELP.items():
        parser = subparsers.add_parser(name, help=text)
        add_experiment_flags(parser)
        parser.set_defaults(handler=handle, experiment=name)


def handle(args: argparse.Namespace) -> int:
    config = experiment_config(args, args.experiment)
    result = run_experiment(config, threads=args.threads)
    manifest = write_result(result, args.out_dir, markovlab.__version__)
    for warning in manifest.warnings:
        logger.warning(warning)
    logger.info(f"{config.experiment}: wrote {', '.join(manifest.files)} to {args.out_dir} in {manifest.wall_time:.1f}s")
    return 0
