import argparse

import markovlab
from markovlab.routes.common import add_experiment_flags, experiment_config
from markovlab.services.experiments import run_lemma_suite, write_result
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

# exit status when any lemma verdict fails
EXIT_LEMMA_FAILURE = 2


def register(subparsers) -> None:
    parser = subparsers.add_parser("lemmas", help="check the concentration lemmas against their envelopes")
    add_experiment_flags(parser)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = experiment_config(args, "lemmas")
    result = run_lemma_suite(config, threads=args.threads)
    write_result(result, args.out_dir, markovlab.__version__)
    failed = sorted({row.lemma for row in result.lemma_rows if row.verdict == "fail"})
    if failed:
        logger.error(f"lemma verdicts failed: {', '.join(failed)}")
        return EXIT_LEMMA_FAILURE
    logger.info("all lemma verdicts pass or are skipped")
    return 0
