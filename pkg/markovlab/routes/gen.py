import argparse

from markovlab.config import settings
from markovlab.routes.common import add_draw_flags, draw_graph
from markovlab.services.markov_builders import build_generator, build_jump_kernel, build_kernel
from markovlab.utils.fileops import write_matrix_dump
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

TARGETS = ("A", "Q", "P", "Qhat")


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="draw one instance and dump A, Q, P or Q-hat")
    parser.add_argument("--n", type=int, default=None)
    add_draw_flags(parser)
    parser.add_argument("--target", choices=TARGETS, default="A")
    parser.add_argument("--out-dir", default=settings.OUT_DIR)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    g, law, theta, seed = draw_graph(args)
    if args.target == "A":
        matrix = g.A
    elif args.target == "Q":
        matrix = build_generator(g).entries
    elif args.target == "P":
        matrix = build_kernel(g).entries
    else:
        matrix = build_jump_kernel(g).entries
    filename = f"{args.target}_n{g.n}_seed{seed}.txt"
    path = write_matrix_dump(args.out_dir, filename, matrix, theta, law, seed)
    logger.info(f"wrote {args.target} for n={g.n}, law {law}, theta {theta} to {path}")
    print(path)
    return 0
