import hashlib
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Optional, Tuple

import numpy as np
from pydantic import ValidationError
from scipy.special import gamma

from markovlab.exceptions import ConfigError, DimensionError, LawSpecError, NonFiniteWeightError
from markovlab.models import (
    BernoulliMixLaw,
    ConstantLaw,
    ConstantTheta,
    ExplicitTheta,
    ExponentialLaw,
    IidTheta,
    InversePowerLaw,
    VertexWeightSpec,
    WeightLaw,
)


INF = math.inf


class LawMoments(NamedTuple):
    mean: float
    variance: float
    p_max: float


@dataclass(frozen=True)
class RngStream:
    """A deterministic substream keyed by (experiment, trial, n).

    Every lane of a stream maps to its own Philox key, so no generator state is
    shared between trials. `attempt` selects the redraw substream after a
    rejected (non-primitive) draw.
    """
    master_seed: int
    experiment: str = "default"
    trial: int = 0
    n: int = 0
    attempt: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master seed must be a 64-bit unsigned integer", key="seed")

    def _entropy(self, lane: str):
        digest = hashlib.blake2b(
            f"{self.experiment}|{lane}".encode("utf-8"), digest_size=8
        ).digest()
        tag = int.from_bytes(digest, "little")
        return [self.master_seed, tag, self.trial, self.n, self.attempt]

    def generator(self, lane: str = "main") -> np.random.Generator:
        seq = np.random.SeedSequence(self._entropy(lane))
        return np.random.Generator(np.random.Philox(seq))

    def redraw(self) -> "RngStream":
        return replace(self, attempt=self.attempt + 1)


# Moments

@lru_cache(maxsize=256)
def _raw_moment(law, k: int) -> float:
    if isinstance(law, ExponentialLaw):
        return math.factorial(k) / law.rate**k
    if isinstance(law, InversePowerLaw):
        # E(Y^(-k/alpha)) = Gamma(1 - k/alpha), finite only for k < alpha
        if k >= law.alpha:
            return INF
        return float(gamma(1.0 - k / law.alpha))
    if isinstance(law, ConstantLaw):
        return law.c**k
    if isinstance(law, BernoulliMixLaw):
        return law.p * _raw_moment(law.base, k)
    raise TypeError(f"unknown law {law!r}")


def law_raw_moment(law: WeightLaw, k: int) -> float:
    """Exact E(X^k); +inf when the moment diverges."""
    return _raw_moment(law, k)


def _p_max(law) -> float:
    if isinstance(law, InversePowerLaw):
        return law.alpha
    if isinstance(law, BernoulliMixLaw):
        return _p_max(law.base)
    return INF


@lru_cache(maxsize=256)
def law_moments(law: WeightLaw) -> LawMoments:
    """Analytic (mean, variance, highest finite moment order) of an edge-weight law."""
    mean = law_raw_moment(law, 1)
    second = law_raw_moment(law, 2)
    if math.isinf(mean) or math.isinf(second):
        variance = INF
    else:
        variance = max(second - mean * mean, 0.0)
    return LawMoments(mean, variance, _p_max(law))


def has_finite_moment(law: WeightLaw, k: float) -> bool:
    """True iff E(X^k) is finite; moments of order p_max itself diverge."""
    return law_moments(law).p_max > k


# Sampling

def _log_inverse_power(law: InversePowerLaw, rng: np.random.Generator, size) -> np.ndarray:
    # log(Y^(-1/alpha)) with Y = -log(U); finite for every representable U
    u = rng.random(size=size)
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return -np.log(-np.log(u)) / law.alpha


def _draw(law, rng: np.random.Generator, size) -> np.ndarray:
    if isinstance(law, ExponentialLaw):
        return rng.exponential(1.0 / law.rate, size=size)
    if isinstance(law, InversePowerLaw):
        # small alpha overflows to +inf here; _log_draw keeps those draws exact
        with np.errstate(over="ignore"):
            return np.exp(_log_inverse_power(law, rng, size))
    if isinstance(law, ConstantLaw):
        return np.full(size, law.c, dtype=float)
    if isinstance(law, BernoulliMixLaw):
        base = _draw(law.base, rng, size)
        keep = rng.random(size=size) < law.p
        return np.where(keep, base, 0.0)
    raise TypeError(f"unknown law {law!r}")


def _log_draw(law, rng: np.random.Generator, size) -> np.ndarray:
    """Natural logs of the draws _draw makes from the same generator state; -inf marks a zero."""
    if isinstance(law, InversePowerLaw):
        return _log_inverse_power(law, rng, size)
    if isinstance(law, BernoulliMixLaw):
        base = _log_draw(law.base, rng, size)
        keep = rng.random(size=size) < law.p
        return np.where(keep, base, -np.inf)
    with np.errstate(divide="ignore"):
        return np.log(_draw(law, rng, size))


def sample_law(law: WeightLaw, size, rng: np.random.Generator) -> np.ndarray:
    return _draw(law, rng, size)


def sample_edge_matrix(law: WeightLaw, n: int, stream: RngStream) -> np.ndarray:
    """n x n matrix of i.i.d. edge weights, deterministic in (law, n, stream).

    Inverse-power draws with small alpha may be +inf; sample_edge_log_matrix
    returns the same draws in log space.
    """
    if n < 2:
        raise DimensionError(f"edge matrix needs n >= 2, got {n}")
    return _draw(law, stream.generator("edges"), (n, n))


def sample_edge_log_matrix(law: WeightLaw, n: int, stream: RngStream) -> np.ndarray:
    if n < 2:
        raise DimensionError(f"edge matrix needs n >= 2, got {n}")
    return _log_draw(law, stream.generator("edges"), (n, n))


def sample_edges(
    law: WeightLaw, n: int, stream: RngStream, symmetric: bool = False
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """X, plus its log when some draw overflowed float64 (None otherwise)."""
    X = sample_edge_matrix(law, n, stream)
    log_X = None
    if not np.isfinite(X).all():
        log_X = sample_edge_log_matrix(law, n, stream)
    if symmetric:
        X = symmetrize_edges(X)
        if log_X is not None:
            log_X = symmetrize_edges(log_X)
    return X, log_X


def sample_vertex_weights(spec: VertexWeightSpec, n: int, stream: RngStream) -> np.ndarray:
    if n < 2:
        raise DimensionError(f"vertex weights need n >= 2, got {n}")
    if isinstance(spec, ConstantTheta):
        return np.full(n, spec.c, dtype=float)
    if isinstance(spec, IidTheta):
        theta = _draw(spec.law, stream.generator("theta"), n)
        if not np.isfinite(theta).all():
            bad = int(np.flatnonzero(~np.isfinite(theta))[0])
            raise NonFiniteWeightError(
                f"theta[{bad}] drawn from {format_law(spec.law)} overflows float64"
            )
        # Exp and inverse-power draws can underflow to 0.0 in double precision
        return np.maximum(theta, np.finfo(float).tiny)
    if isinstance(spec, ExplicitTheta):
        theta = np.asarray(spec.values, dtype=float)
        if theta.shape != (n,):
            raise DimensionError(f"explicit theta has length {theta.size}, expected {n}")
        if np.any(~(theta > 0)):
            bad = int(np.flatnonzero(~(theta > 0))[0])
            raise ConfigError(f"theta[{bad}] = {theta[bad]} is not positive", key="theta")
        return theta
    raise TypeError(f"unknown vertex-weight spec {spec!r}")


def symmetrize_edges(X: np.ndarray) -> np.ndarray:
    """Mirror the upper triangle (diagonal included) onto the lower one."""
    upper = np.triu(X)
    return upper + np.triu(X, 1).T


# Mini-grammar

def _positive_float(text: str, whole: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise LawSpecError(whole) from None
    if not math.isfinite(value):
        raise LawSpecError(whole, "non-finite parameter in")
    return value


def parse_law(text: str) -> WeightLaw:
    """Parse `exp:<rate>`, `invpow:<alpha>`, `const:<c>` or `bern:<p>:<base>`."""
    whole = text
    head, sep, rest = text.strip().partition(":")
    head = head.lower()
    if not sep or not rest:
        raise LawSpecError(whole)
    try:
        if head == "exp":
            return ExponentialLaw(rate=_positive_float(rest, whole))
        if head == "invpow":
            return InversePowerLaw(alpha=_positive_float(rest, whole))
        if head == "const":
            return ConstantLaw(c=_positive_float(rest, whole))
        if head == "bern":
            p_text, sep, base_text = rest.partition(":")
            if not sep:
                raise LawSpecError(whole)
            return BernoulliMixLaw(p=_positive_float(p_text, whole), base=parse_law(base_text))
    except ValidationError as e:
        raise LawSpecError(whole, f"out-of-range parameter ({e.errors()[0]['msg']}) in") from None
    raise LawSpecError(whole)


def _num(value: float) -> str:
    """Shortest text that parses back to the same float."""
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def format_law(law: WeightLaw) -> str:
    if isinstance(law, ExponentialLaw):
        return f"exp:{_num(law.rate)}"
    if isinstance(law, InversePowerLaw):
        return f"invpow:{_num(law.alpha)}"
    if isinstance(law, ConstantLaw):
        return f"const:{_num(law.c)}"
    if isinstance(law, BernoulliMixLaw):
        return f"bern:{_num(law.p)}:{format_law(law.base)}"
    raise TypeError(f"unknown law {law!r}")


def parse_theta(text: str) -> VertexWeightSpec:
    """Parse `const:<c>`, `iid:<law>` or `explicit:<v1,v2,...>`."""
    head, sep, rest = text.strip().partition(":")
    head = head.lower()
    valid = "const:<c>, iid:<law>, explicit:<v1,v2,...>"
    if not sep or not rest:
        raise ConfigError(f"malformed theta {text!r}; valid forms: {valid}", key="theta")
    try:
        if head == "const":
            return ConstantTheta(c=float(rest))
        if head == "iid":
            return IidTheta(law=parse_law(rest))
        if head == "explicit":
            return ExplicitTheta(values=tuple(float(v) for v in rest.split(",")))
    except (ValueError, ValidationError):
        raise ConfigError(f"malformed theta {text!r}; valid forms: {valid}", key="theta") from None
    raise ConfigError(f"malformed theta {text!r}; valid forms: {valid}", key="theta")


def format_theta(spec: VertexWeightSpec) -> str:
    if isinstance(spec, ConstantTheta):
        return f"const:{_num(spec.c)}"
    if isinstance(spec, IidTheta):
        return f"iid:{format_law(spec.law)}"
    if isinstance(spec, ExplicitTheta):
        return "explicit:" + ",".join(_num(v) for v in spec.values)
    raise TypeError(f"unknown vertex-weight spec {spec!r}")
