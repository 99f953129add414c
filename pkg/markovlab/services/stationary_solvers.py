"""Invariant distributions of Markov generators and kernels.

Three independent routes cross-check each other: damped power iteration, a
dense direct solve, and the Markov chain tree theorem (cofactors of the
Laplacian, or explicit enumeration of rooted in-trees for tiny n).
"""
import math
import warnings
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import scipy.linalg

from markovlab.config import settings
from markovlab.exceptions import (
    ConvergenceError,
    DimensionError,
    IsolatedRowError,
    ReducibleError,
    SingularSystemError,
)
from markovlab.services.markov_builders import (
    GeneratorMatrix,
    KernelMatrix,
    MarkovMatrix,
    Primitivity,
    ProbabilityVector,
    build_laplacian,
    classify_support,
    jump_kernel_from_generator,
)
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

Method = Literal["power", "direct", "tree_cofactor", "tree_enumeration"]

COFACTOR_MAX_N = 64
ENUMERATION_MAX_N = 6


@dataclass(frozen=True)
class SolveReport:
    pi: ProbabilityVector
    method: Method
    residual: float
    iterations: Optional[int] = None


def residual(pi: np.ndarray, M: MarkovMatrix) -> float:
    """||pi Q||_1 for a generator, ||pi K - pi||_1 for a kernel."""
    if isinstance(M, GeneratorMatrix):
        return float(np.abs(pi @ M.entries).sum())
    return float(np.abs(pi @ M.entries - pi).sum())


def _offdiag_support(M: MarkovMatrix) -> np.ndarray:
    W = np.array(M.entries)
    if isinstance(M, GeneratorMatrix):
        np.fill_diagonal(W, 0.0)
    return W


def _clean(pi: np.ndarray) -> ProbabilityVector:
    """Clip rounding-level negatives and renormalize."""
    scale = np.abs(pi).max()
    if pi.min() < -1e-9 * scale:
        raise ReducibleError(
            f"solution has a negative entry {pi.min():.3e}; support is reducible or badly conditioned"
        )
    return ProbabilityVector.normalized(np.maximum(pi, 0.0))


def stationary_kernel_power(
    K: KernelMatrix,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> SolveReport:
    """Power iteration on (I + K)/2 from the uniform distribution.

    The lazy chain has the same fixed points as K and is aperiodic whenever K
    is irreducible, so periodic kernels converge too. Stops when the l1 change
    between successive iterates is at most tol.
    """
    tol = settings.POWER_TOL if tol is None else tol
    max_iter = settings.POWER_MAX_ITER if max_iter is None else max_iter
    if classify_support(K.entries) is Primitivity.REDUCIBLE:
        raise ReducibleError("kernel support is reducible")

    n = K.n
    pi = np.full(n, 1.0 / n)
    change = math.inf
    for iteration in range(1, max_iter + 1):
        nxt = 0.5 * (pi + pi @ K.entries)
        nxt /= nxt.sum()
        change = float(np.abs(nxt - pi).sum())
        pi = nxt
        if change <= tol:
            break
    else:
        raise ConvergenceError(max_iter, residual(pi, K))

    solution = _clean(pi)
    return SolveReport(pi=solution, method="power", residual=residual(solution.values, K), iterations=iteration)


def stationary_direct(M: MarkovMatrix) -> SolveReport:
    """Dense LU solve of pi L = 0 with one redundant equation replaced by sum(pi) = 1."""
    n = M.n
    if n > settings.MAX_N:
        raise DimensionError(f"direct solve supports n <= {settings.MAX_N}, got {n}")
    if classify_support(_offdiag_support(M)) is Primitivity.REDUCIBLE:
        raise ReducibleError(f"{'generator' if isinstance(M, GeneratorMatrix) else 'kernel'} support is reducible")
    L = build_laplacian(M)
    scale = np.abs(L).max()
    if not scale > 0:
        raise ReducibleError("matrix has no transitions")
    # rows of the transposed system are the columns of L
    system = np.array(L.T) / scale
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            pi = scipy.linalg.solve(system, rhs, check_finite=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        raise SingularSystemError(float(np.linalg.cond(system))) from None

    solution = _clean(pi)
    res = residual(solution.values, M)
    relative = res / scale if isinstance(M, GeneratorMatrix) else res
    if relative > settings.DIRECT_RESIDUAL_TOL:
        logger.warning(f"direct solve residual {relative:.3e} above {settings.DIRECT_RESIDUAL_TOL:.0e} (n={n})")
    return SolveReport(pi=solution, method="direct", residual=res)


def stationary_generator(
    Q: GeneratorMatrix,
    method: Literal["via_jump", "direct"] = "via_jump",
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> SolveReport:
    """pi_Q either through the jump chain, pi_Q(i) proportional to pi_Qhat(i) / q_i,
    or through the direct solver."""
    q = -np.diag(Q.entries)
    zero = np.flatnonzero(~(q > 0))
    if zero.size:
        raise IsolatedRowError(int(zero[0]), "exit rate")
    if method == "direct":
        return stationary_direct(Q)
    if method != "via_jump":
        raise ValueError(f"unknown generator method {method!r}")

    jump = stationary_kernel_power(jump_kernel_from_generator(Q), tol=tol, max_iter=max_iter)
    pi = ProbabilityVector.normalized(jump.pi.values / q)
    return SolveReport(pi=pi, method="power", residual=residual(pi.values, Q), iterations=jump.iterations)


# Markov chain tree theorem

def _tree_weights_cofactor(M: MarkovMatrix) -> np.ndarray:
    """Principal minors of L: det L^(i) is the total weight of in-trees rooted at i."""
    L = build_laplacian(M)
    n = M.n
    signs = np.empty(n)
    logdets = np.empty(n)
    for i in range(n):
        keep = np.r_[0:i, i + 1:n]
        signs[i], logdets[i] = np.linalg.slogdet(L[np.ix_(keep, keep)])
    finite = np.isfinite(logdets) & (signs > 0)
    if not finite.any():
        raise ReducibleError("every rooted spanning tree has zero weight")
    weights = np.zeros(n)
    weights[finite] = np.exp(logdets[finite] - logdets[finite].max())
    return weights


def _tree_weights_enumeration(M: MarkovMatrix) -> np.ndarray:
    """Sum over all rooted in-trees of the product of their edge weights."""
    W = _offdiag_support(M)
    n = M.n
    weights = np.zeros(n)
    for root in range(n):
        others = [v for v in range(n) if v != root]
        parent = [-1] * n
        products = []

        def closes_cycle(v: int, p: int) -> bool:
            while p != -1 and p != root:
                if p == v:
                    return True
                p = parent[p]
            return False

        def grow(depth: int, product: float):
            if depth == len(others):
                products.append(product)
                return
            v = others[depth]
            for p in range(n):
                w = W[v, p]
                if p == v or w == 0.0 or closes_cycle(v, p):
                    continue
                parent[v] = p
                grow(depth + 1, product * w)
                parent[v] = -1

        grow(0, 1.0)
        weights[root] = math.fsum(products)
    if not weights.any():
        raise ReducibleError("every rooted spanning tree has zero weight")
    return weights


def stationary_tree_oracle(
    M: MarkovMatrix,
    mode: Literal["cofactor", "enumeration"] = "cofactor",
) -> SolveReport:
    if mode == "cofactor":
        if M.n > COFACTOR_MAX_N:
            raise DimensionError(f"cofactor mode supports n <= {COFACTOR_MAX_N}, got {M.n}")
        weights = _tree_weights_cofactor(M)
    elif mode == "enumeration":
        if M.n > ENUMERATION_MAX_N:
            raise DimensionError(f"enumeration mode supports n <= {ENUMERATION_MAX_N}, got {M.n}")
        weights = _tree_weights_enumeration(M)
    else:
        raise ValueError(f"unknown tree-oracle mode {mode!r}")
    pi = ProbabilityVector.normalized(weights)
    return SolveReport(pi=pi, method=f"tree_{mode}", residual=residual(pi.values, M))
