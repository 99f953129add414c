"""Adjacency, generator and kernel construction on the complete digraph.

All matrices are dense float64 arrays, frozen (read-only) once built.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Literal, Optional, Union

import networkx as nx
import numpy as np

from markovlab.exceptions import DimensionError, IsolatedRowError, NonFiniteWeightError
from markovlab.utils.logger import get_logger

logger = get_logger(__name__)

ROW_SUM_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def compensated_row_sums(M: np.ndarray) -> np.ndarray:
    """Neumaier-compensated row sums, vectorized over rows."""
    M = np.asarray(M, dtype=float)
    total = np.zeros(M.shape[0])
    comp = np.zeros(M.shape[0])
    for j in range(M.shape[1]):
        x = M[:, j]
        t = total + x
        big = np.abs(total) >= np.abs(x)
        comp += np.where(big, (total - t) + x, (x - t) + total)
        total = t
    return total + comp


@dataclass(frozen=True)
class WeightedDigraph:
    """theta, X and A = theta_i X_ij.

    log_X is set only when X holds entries that overflowed to +inf; kernels
    are then normalized from it row by row.
    """
    theta: np.ndarray
    X: np.ndarray
    A: np.ndarray
    log_X: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def without_loops(self) -> "WeightedDigraph":
        X = np.array(self.X)
        np.fill_diagonal(X, 0.0)
        log_X = None
        if self.log_X is not None:
            log_X = np.array(self.log_X)
            np.fill_diagonal(log_X, -np.inf)
        return build_adjacency(self.theta, X, log_X)


@dataclass(frozen=True)
class GeneratorMatrix:
    entries: np.ndarray

    def __post_init__(self):
        Q = self.entries
        off = Q - np.diag(np.diag(Q))
        if np.any(off < 0):
            raise ValueError("generator has a negative off-diagonal entry")
        scale = max(np.abs(Q).sum(axis=1).max(), np.finfo(float).tiny)
        if np.abs(Q.sum(axis=1)).max() > ROW_SUM_TOL * scale:
            raise ValueError("generator rows do not sum to 0")

    @property
    def n(self) -> int:
        return self.entries.shape[0]


KernelVariant = Literal["P_with_loops", "jump_Q_hat"]


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    variant: KernelVariant = "P_with_loops"

    def __post_init__(self):
        K = self.entries
        if np.any(K < 0) or np.any(K > 1 + ROW_SUM_TOL):
            raise ValueError("kernel entries must lie in [0, 1]")
        if np.abs(K.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError("kernel rows do not sum to 1")
        if self.variant == "jump_Q_hat" and np.any(np.diag(K) != 0):
            raise ValueError("jump kernel must have a zero diagonal")

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class ProbabilityVector:
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("not a probability vector")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @classmethod
    def normalized(cls, weights: np.ndarray) -> "ProbabilityVector":
        weights = np.asarray(weights, dtype=float)
        return cls(_frozen(weights / weights.sum()))

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls(_frozen(np.full(n, 1.0 / n)))


MarkovMatrix = Union[GeneratorMatrix, KernelMatrix]


def build_adjacency(
    theta: np.ndarray, X: np.ndarray, log_X: Optional[np.ndarray] = None
) -> WeightedDigraph:
    theta = np.asarray(theta, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1] or theta.shape != (X.shape[0],):
        raise DimensionError(f"theta of shape {theta.shape} does not match X of shape {X.shape}")
    if np.any(~(theta > 0)) or not np.isfinite(theta).all():
        bad = int(np.flatnonzero(~(theta > 0) | ~np.isfinite(theta))[0])
        raise DimensionError(f"theta[{bad}] = {theta[bad]} is not positive and finite")
    if np.any(~(X >= 0)):
        raise DimensionError("edge weights must be non-negative")
    if log_X is not None:
        log_X = np.asarray(log_X, dtype=float)
        if log_X.shape != X.shape:
            raise DimensionError(f"log weights of shape {log_X.shape} do not match X of shape {X.shape}")
        log_X = _frozen(log_X)
    elif not np.isfinite(X).all():
        raise NonFiniteWeightError("edge weights overflow float64 and no log weights were given")
    with np.errstate(over="ignore"):
        A = theta[:, None] * X
    return WeightedDigraph(theta=_frozen(theta), X=_frozen(X), A=_frozen(A), log_X=log_X)


def _offdiag_row_sums(M: np.ndarray) -> np.ndarray:
    M = np.array(M)
    np.fill_diagonal(M, 0.0)
    return compensated_row_sums(M)


def exit_rates(g: WeightedDigraph) -> np.ndarray:
    """q_i = theta_i * sum_{j != i} X_ij, the absolute diagonal of the generator."""
    with np.errstate(over="ignore", invalid="ignore"):
        q = g.theta * _offdiag_row_sums(g.X)
    if not np.isfinite(q).all():
        bad = int(np.flatnonzero(~np.isfinite(q))[0])
        raise NonFiniteWeightError(
            f"exit rate of row {bad + 1} (index {bad}) overflows float64; "
            "the generator needs absolute rates, use a lighter-tailed law"
        )
    return q


def build_generator(g: WeightedDigraph) -> GeneratorMatrix:
    """Q = A - diag(A 1); the diagonal of A cancels against D."""
    Q = np.array(g.A)
    np.fill_diagonal(Q, -exit_rates(g))
    return GeneratorMatrix(_frozen(Q))


def _normalize_rows(W: np.ndarray, what: str, log_W: Optional[np.ndarray] = None) -> np.ndarray:
    """Divide each row by its sum after scaling it by its largest entry.

    Rows are scale-free, so entries near the float64 limit normalize without
    overflow. Rows holding +inf are normalized from log_W instead.
    """
    W = np.asarray(W, dtype=float)
    if np.isnan(W).any():
        raise NonFiniteWeightError(f"NaN entry in matrix before normalizing by {what}")
    if np.isinf(W).any():
        if log_W is None:
            bad = int(np.flatnonzero(np.isinf(W).any(axis=1))[0])
            raise NonFiniteWeightError(f"row {bad + 1} (index {bad}) holds an infinite weight")
        top = log_W.max(axis=1)
        zero = np.flatnonzero(~np.isfinite(top))
        if zero.size:
            raise IsolatedRowError(int(zero[0]), what)
        scaled = np.exp(log_W - top[:, None])
    else:
        top = W.max(axis=1)
        zero = np.flatnonzero(~(top > 0))
        if zero.size:
            raise IsolatedRowError(int(zero[0]), what)
        scaled = W / top[:, None]
    return scaled / compensated_row_sums(scaled)[:, None]


def build_kernel(g: WeightedDigraph) -> KernelMatrix:
    """P = D^-1 A. Normalizes X directly so that P does not depend on theta."""
    return KernelMatrix(_frozen(_normalize_rows(g.X, "row sum", g.log_X)), "P_with_loops")


def build_jump_kernel(g: WeightedDigraph) -> KernelMatrix:
    """Q-hat = D-hat^-1 A-hat, the embedded jump chain of Q."""
    h = g.without_loops()
    K = _normalize_rows(h.X, "off-diagonal row sum", h.log_X)
    np.fill_diagonal(K, 0.0)
    return KernelMatrix(_frozen(K), "jump_Q_hat")


def jump_kernel_from_generator(Q: GeneratorMatrix) -> KernelMatrix:
    """Q-hat_ij = Q_ij / q_i for j != i."""
    W = np.array(Q.entries)
    np.fill_diagonal(W, 0.0)
    K = _normalize_rows(W, "exit rate")
    np.fill_diagonal(K, 0.0)
    return KernelMatrix(_frozen(K), "jump_Q_hat")


def build_laplacian(M: MarkovMatrix) -> np.ndarray:
    """L = -Q for a generator, L = I - K for a kernel."""
    if isinstance(M, GeneratorMatrix):
        return -np.array(M.entries)
    return np.eye(M.n) - M.entries


def reciprocal_distribution(x: np.ndarray) -> ProbabilityVector:
    """nu_x(i) proportional to 1/x_i."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or np.any(~(x > 0)):
        raise DimensionError("reciprocal distribution needs a strictly positive vector")
    return ProbabilityVector.normalized(1.0 / x)


# Primitivity

class Primitivity(str, Enum):
    PRIMITIVE = "primitive"
    REDUCIBLE = "reducible"
    PERIODIC = "periodic"


@dataclass(frozen=True)
class PrimitivityReport:
    adjacency: Primitivity
    jump: Primitivity

    @property
    def is_usable(self) -> bool:
        return self.adjacency is Primitivity.PRIMITIVE and self.jump is Primitivity.PRIMITIVE


def classify_support(W: np.ndarray) -> Primitivity:
    """Classify the support digraph of a non-negative square matrix."""
    support = np.asarray(W) > 0
    n = support.shape[0]
    off = support.copy()
    np.fill_diagonal(off, True)
    if off.all():
        # complete digraph: 2- and 3-cycles (n >= 3) or a loop make it aperiodic
        if n >= 3 or np.diag(support).any():
            return Primitivity.PRIMITIVE
        return Primitivity.PERIODIC
    graph = nx.from_numpy_array(support.astype(np.int8), create_using=nx.DiGraph)
    if not nx.is_strongly_connected(graph):
        return Primitivity.REDUCIBLE
    if nx.is_aperiodic(graph):
        return Primitivity.PRIMITIVE
    return Primitivity.PERIODIC


def check_primitive(g: WeightedDigraph) -> PrimitivityReport:
    report = PrimitivityReport(
        adjacency=classify_support(g.A),
        jump=classify_support(g.without_loops().A),
    )
    if not report.is_usable:
        logger.debug(f"support classified as A={report.adjacency.value}, A-hat={report.jump.value}")
    return report
