import argparse
import math

from markovlab.config import settings
from markovlab.exceptions import ConfigError
from markovlab.routes.common import add_draw_flags, draw_graph, positive_int
from markovlab.services.markov_builders import (
    GeneratorMatrix,
    KernelMatrix,
    MarkovMatrix,
    build_generator,
    build_jump_kernel,
    build_kernel,
)
from markovlab.services.stationary_solvers import (
    SolveReport,
    stationary_direct,
    stationary_generator,
    stationary_kernel_power,
    stationary_tree_oracle,
)
from markovlab.utils.fileops import read_matrix_dump

TARGETS = ("Q", "P", "Qhat")
METHODS = ("power", "direct", "via_jump", "tree")


def register(subparsers) -> None:
    parser = subparsers.add_parser("solve", help="print the invariant distribution of Q, P or Q-hat")
    parser.add_argument("--n", type=int, default=None)
    add_draw_flags(parser)
    parser.add_argument("--matrix", default=None, help="solve a matrix dump written by `gen` instead of drawing")
    parser.add_argument("--target", choices=TARGETS, default="Q")
    parser.add_argument("--method", choices=METHODS, default="power")
    parser.add_argument("--mode", choices=("cofactor", "enumeration"), default="cofactor")
    parser.add_argument("--tol", type=float, default=settings.POWER_TOL)
    parser.add_argument("--precision", type=positive_int, default=settings.PRECISION)
    parser.set_defaults(handler=handle)


def target_matrix(args: argparse.Namespace) -> MarkovMatrix:
    if args.matrix is not None:
        _, entries = read_matrix_dump(args.matrix)
        try:
            if args.target == "Q":
                return GeneratorMatrix(entries)
            return KernelMatrix(entries, "P_with_loops" if args.target == "P" else "jump_Q_hat")
        except ValueError as e:
            raise ConfigError(f"{args.matrix} is not a valid {args.target}: {e}", key="--matrix") from None
    g = draw_graph(args)[0]
    if args.target == "Q":
        return build_generator(g)
    if args.target == "P":
        return build_kernel(g)
    return build_jump_kernel(g)


def solve(M: MarkovMatrix, method: str, mode: str, tol: float) -> SolveReport:
    if method == "direct":
        return stationary_direct(M)
    if method == "tree":
        return stationary_tree_oracle(M, mode)
    if isinstance(M, GeneratorMatrix):
        return stationary_generator(M, "via_jump", tol=tol)
    if method == "via_jump":
        raise ConfigError("via_jump applies to the generator only (--target Q)", key="--method")
    return stationary_kernel_power(M, tol=tol)


def handle(args: argparse.Namespace) -> int:
    if not (args.tol > 0 and math.isfinite(args.tol)):
        raise ConfigError(f"must be a positive finite number, got {args.tol}", key="--tol")
    M = target_matrix(args)
    report = solve(M, args.method, args.mode, args.tol)
    p = args.precision
    header = f"# target={args.target} n={M.n} method={report.method} residual={report.residual:.3e}"
    if report.iterations is not None:
        header += f" iterations={report.iterations}"
    print(header)
    for value in report.pi.values:
        print(f"{value:.{p}g}")
    return 0
