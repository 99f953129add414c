import math
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy import stats

from markovlab.exceptions import DimensionError, MomentPreconditionError
from markovlab.models import LemmaStatistics, WeightLaw
from markovlab.services.markov_builders import (
    KernelMatrix,
    ProbabilityVector,
    WeightedDigraph,
    compensated_row_sums,
)
from markovlab.services.weight_models import RngStream, law_moments, sample_law

Distribution = Union[ProbabilityVector, np.ndarray]

# trials x n draws are generated in blocks of at most this many entries
TAIL_BLOCK_ENTRIES = 2_000_000


def _as_array(p: Distribution) -> np.ndarray:
    return p.values if isinstance(p, ProbabilityVector) else np.asarray(p, dtype=float)


def _pair(mu: Distribution, nu: Distribution) -> Tuple[np.ndarray, np.ndarray]:
    a, b = _as_array(mu), _as_array(nu)
    if a.shape != b.shape:
        raise DimensionError(f"distributions of length {a.size} and {b.size}")
    return a, b


def tv_distance(mu: Distribution, nu: Distribution) -> float:
    a, b = _pair(mu, nu)
    return 0.5 * float(np.abs(a - b).sum())


def linf_distance(mu: Distribution, nu: Distribution) -> float:
    a, b = _pair(mu, nu)
    return float(np.abs(a - b).max())


def descending_scaled(pi: Distribution) -> np.ndarray:
    """n * pi sorted in non-increasing order."""
    values = _as_array(pi)
    return np.sort(values)[::-1] * values.size


def loglog_slope(points: Iterable[Tuple[float, float]]) -> Tuple[float, float, float]:
    """Least-squares line through (ln n, ln value); returns (slope, intercept, r^2)."""
    points = list(points)
    if len(points) < 3:
        raise ValueError(f"log-log fit needs at least 3 points, got {len(points)}")
    sizes = np.array([p[0] for p in points], dtype=float)
    values = np.array([p[1] for p in points], dtype=float)
    if np.unique(sizes).size != sizes.size:
        raise ValueError("log-log fit needs distinct sizes")
    if np.any(~(values > 0)) or np.any(~(sizes > 0)):
        raise ValueError("log-log fit needs positive sizes and values")
    fit = stats.linregress(np.log(sizes), np.log(values))
    return float(fit.slope), float(fit.intercept), float(fit.rvalue**2)


def compute_lemma_statistics(
    g: WeightedDigraph,
    K: KernelMatrix,
    pi_jump: Distribution,
    mu: float,
) -> LemmaStatistics:
    """Per-draw statistics behind the concentration lemmas.

    Fields that centre on the mean are left empty when mu is infinite.
    """
    X = g.X
    n = g.n
    row = compensated_row_sums(X)
    offdiag = row - np.diag(X)
    entries = K.entries
    two_step = entries @ entries
    jump = _as_array(pi_jump)

    centered = deviation = numerator = None
    if math.isfinite(mu):
        centered = float(np.abs(row - n * mu).max())
        if mu > 0:
            deviation = float(np.abs(offdiag - (n - 1) * mu).max() / (n * mu))
            Z = np.array(X)
            np.fill_diagonal(Z, 0.0)
            S = Z @ Z
            np.fill_diagonal(S, np.inf)
            numerator = float(S.min() / (mu * mu * n))

    return LemmaStatistics(
        n=n,
        max_centered_rowsum=centered,
        min_offdiag_rowsum=float(offdiag.min()),
        max_rowsum=float(row.max()),
        max_row_l2=float((entries**2).sum(axis=1).max()),
        max_entry=float(entries.max()),
        min_two_step=float(two_step.min()),
        linf_jump_gap=float(np.abs(jump - 1.0 / n).max()),
        max_edge_weight=float(X.max()),
        rowsum_deviation=deviation,
        min_two_step_numerator=numerator,
    )


def jump_sandwich_bound(pi_jump: Distribution) -> float:
    """Upper bound on TV(pi_Q, nu_q) from delta = n * ||pi_Qhat - u||_inf.

    pi_Q(i) is proportional to pi_Qhat(i) / q_i, so pi_Q / nu_q lies in
    [(1-delta)/(1+delta), (1+delta)/(1-delta)].
    """
    values = _as_array(pi_jump)
    delta = values.size * float(np.abs(values - 1.0 / values.size).max())
    if delta >= 1.0:
        return math.inf
    return max(delta / (1.0 + delta), delta / (1.0 - delta))


def theorem_exponent(p_max: float) -> Optional[float]:
    """Supremum of admissible rate exponents, min(1/2, 1 - 4/p); None when p <= 4."""
    if p_max <= 4:
        return None
    if math.isinf(p_max):
        return 0.5
    return min(0.5, 1.0 - 4.0 / p_max)


def chernoff_bound(mu: float, variance: float, n: int, eps: float) -> float:
    """exp(-eps^2 mu^2 n / (2 (mu^2 + sigma^2))), the lower-tail bound for sums of
    n i.i.d. non-negative variables."""
    if not (mu > 0 and math.isfinite(mu)):
        raise ValueError(f"mean must be positive and finite, got {mu}")
    if not (variance > 0 and math.isfinite(variance)):
        raise ValueError(f"variance must be positive and finite, got {variance}")
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    m2 = mu * mu + variance
    return math.exp(-eps * eps * mu * mu * n / (2.0 * m2))


def empirical_lower_tail(
    law: WeightLaw,
    n: int,
    eps: float,
    trials: int,
    stream: RngStream,
) -> float:
    """Fraction of trials with S_n <= (1 - eps) mu n."""
    mu, variance, _ = law_moments(law)
    if not (math.isfinite(mu) and math.isfinite(variance)):
        raise MomentPreconditionError("lower-tail frequency needs finite mean and variance")
    rng = stream.generator("tail")
    threshold = (1.0 - eps) * mu * n
    block = max(1, TAIL_BLOCK_ENTRIES // n)
    hits = 0
    done = 0
    while done < trials:
        size = min(block, trials - done)
        sums = sample_law(law, (size, n), rng).sum(axis=1)
        hits += int(np.count_nonzero(sums <= threshold))
        done += size
    return hits / trials
