import argparse
import sys
from typing import List, Optional

from markovlab.exceptions import ConfigError, MarkovLabError
from markovlab.routes import figures, gen, lemmas, solve
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

EXIT_ERROR = 1


class ArgumentParser(argparse.ArgumentParser):
    """Flag errors become ConfigError instead of SystemExit(2), which is reserved for lemma failures."""

    def error(self, message: str):
        raise ConfigError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="markovlab",
        description="Random Markov generators and kernels on weighted complete digraphs",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    gen.register(subparsers)
    solve.register(subparsers)
    figures.register(subparsers)
    lemmas.register(subparsers)
    return parser


def parse_and_dispatch(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except MarkovLabError as e:
        logger.debug("command failed", exc_info=True)
        print(f"markovlab: error: {e}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(parse_and_dispatch())
