from typing import Annotated, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from markovlab.config import settings


# Edge-weight laws

class ExponentialLaw(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["exp"] = "exp"
    rate: float = Field(1.0, gt=0)

    @property
    def degenerate(self) -> bool:
        return False

    @property
    def positive_support(self) -> bool:
        return True


class InversePowerLaw(BaseModel):
    """X = Y^(-1/alpha) with Y ~ Exp(1); moments of order < alpha are finite."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["invpow"] = "invpow"
    alpha: float = Field(..., gt=0)

    @property
    def degenerate(self) -> bool:
        return False

    @property
    def positive_support(self) -> bool:
        return True


class ConstantLaw(BaseModel):
    """Point mass at c. Only experiment configs flagged as fixtures accept it."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["const"] = "const"
    c: float = Field(1.0, gt=0)

    @property
    def degenerate(self) -> bool:
        return True

    @property
    def positive_support(self) -> bool:
        return True


class BernoulliMixLaw(BaseModel):
    """X = B * X' with B ~ Bernoulli(p) independent of X' ~ base."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["bern"] = "bern"
    p: float = Field(..., gt=0, lt=1)
    base: "WeightLaw"

    @property
    def degenerate(self) -> bool:
        return False

    @property
    def positive_support(self) -> bool:
        return False


WeightLaw = Annotated[
    Union[ExponentialLaw, InversePowerLaw, ConstantLaw, BernoulliMixLaw],
    Field(discriminator="kind"),
]

BernoulliMixLaw.model_rebuild()


# Vertex weights

class ConstantTheta(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["const"] = "const"
    c: float = Field(1.0, gt=0)


class IidTheta(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["iid"] = "iid"
    law: WeightLaw

    @field_validator("law")
    @classmethod
    def _strictly_positive(cls, law):
        if not law.positive_support:
            raise ValueError("vertex-weight law must have strictly positive support")
        return law


class ExplicitTheta(BaseModel):
    # positivity and length are checked when the vector is used
    model_config = ConfigDict(frozen=True)

    kind: Literal["explicit"] = "explicit"
    values: Tuple[float, ...]


VertexWeightSpec = Annotated[
    Union[ConstantTheta, IidTheta, ExplicitTheta],
    Field(discriminator="kind"),
]


# Experiments

ExperimentName = Literal["fig1", "fig2", "rate", "lemmas"]

DEFAULT_N_GRID = (100, 200, 400, 800, 1600)
DEFAULT_LEMMA_N_GRID = (250, 500, 1000, 2000)
DEFAULT_ALPHA_GRID = (0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentName
    edge_law: WeightLaw = ExponentialLaw()
    theta: VertexWeightSpec = None  # resolved per experiment
    n_grid: Tuple[int, ...] = None  # resolved per experiment
    alpha_grid: Tuple[float, ...] = DEFAULT_ALPHA_GRID
    trials: int = Field(10, ge=1)
    master_seed: int = Field(0, ge=0, lt=2**64)
    rate_exponent: float = Field(0.4, gt=0, lt=0.5)

    # size of the curve panels (fig1 a/b, fig2 a/c)
    panel_n: int = Field(100, ge=2, le=settings.MAX_N)
    fix_theta: bool = False
    symmetric: bool = False
    # admits the degenerate constant law
    fixture: bool = False

    # lower-tail Monte Carlo grid
    epsilon_grid: Tuple[float, ...] = (0.3, 0.5, 0.7)
    tail_n_grid: Tuple[int, ...] = (50, 100, 200)
    tail_trials: int = Field(100_000, ge=1)

    # lemma-suite envelopes (frozen from pilot runs, see DESIGN.md)
    l2_spread_factor: float = Field(3.0, gt=1)
    two_step_low: float = 0.5
    two_step_high: float = 1.0
    jump_gap_exponent: float = Field(0.4, gt=0, lt=0.5)
    jump_gap_cap: float = Field(10.0, gt=0)
    max_entry_exponent: float = Field(0.5, gt=0, lt=1)
    max_entry_cap: float = Field(2.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _experiment_defaults(cls, data):
        if not isinstance(data, dict):
            return data
        data = dict(data)
        experiment = data.get("experiment")
        if data.get("theta") is None:
            if experiment == "fig2":
                data["theta"] = ConstantTheta(c=1.0)
            else:
                data["theta"] = IidTheta(law=ExponentialLaw(rate=1.0))
        if data.get("n_grid") is None:
            data["n_grid"] = DEFAULT_LEMMA_N_GRID if experiment == "lemmas" else DEFAULT_N_GRID
        return data

    @field_validator("n_grid", "tail_n_grid")
    @classmethod
    def _increasing_sizes(cls, grid):
        if not grid:
            raise ValueError("grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if grid[0] < 2 or grid[-1] > settings.MAX_N:
            raise ValueError(f"sizes must lie in [2, {settings.MAX_N}]")
        return grid

    @field_validator("alpha_grid")
    @classmethod
    def _positive_alphas(cls, grid):
        if not grid or any(a <= 0 for a in grid):
            raise ValueError("alpha_grid must be a non-empty list of positive reals")
        return grid

    @field_validator("epsilon_grid")
    @classmethod
    def _unit_epsilons(cls, grid):
        if not grid or any(not 0 < e < 1 for e in grid):
            raise ValueError("epsilon_grid entries must lie in (0, 1)")
        return grid

    @model_validator(mode="after")
    def _two_step_band(self):
        if not 0 <= self.two_step_low <= self.two_step_high:
            raise ValueError("two_step_low must not exceed two_step_high")
        return self


class TrialRecord(BaseModel):
    experiment: str
    panel: str
    n: int
    alpha: Optional[float] = None
    trial: int
    rejections: int = 0
    metrics: Dict[str, float]

    def sort_key(self):
        return (self.experiment, self.panel, self.n, -1.0 if self.alpha is None else self.alpha, self.trial)


class AggregateRecord(BaseModel):
    experiment: str
    panel: str
    n: int
    alpha: Optional[float] = None
    metric: str
    mean: float
    std: float = Field(..., ge=0)
    count: int


class LemmaStatistics(BaseModel):
    n: int
    # moment-dependent fields are None when the edge law has infinite mean
    max_centered_rowsum: Optional[float] = None
    min_offdiag_rowsum: float
    max_rowsum: float
    max_row_l2: float
    max_entry: float
    min_two_step: float
    linf_jump_gap: float
    max_edge_weight: float
    rowsum_deviation: Optional[float] = None
    min_two_step_numerator: Optional[float] = None

    @model_validator(mode="after")
    def _two_step_below_average(self):
        if self.min_two_step > 1.0 / self.n + 1e-12:
            raise ValueError("min_two_step exceeds the row average 1/n")
        return self


Verdict = Literal["pass", "fail", "skipped: moment precondition"]


class LemmaRow(BaseModel):
    lemma: str
    n: int
    epsilon: Optional[float] = None
    statistic: Optional[float] = None
    threshold: Optional[float] = None
    verdict: Verdict


class RateFit(BaseModel):
    metric: str
    slope: float
    intercept: float
    r2: float


class RateReport(BaseModel):
    n_grid: Tuple[int, ...]
    fits: List[RateFit]
    reference_exponent: float
    theoretical_bound: Optional[float] = None


class RunManifest(BaseModel):
    config: ExperimentConfig
    master_seed: int
    version: str
    rejections: Dict[str, int]
    solver_fallbacks: int = 0
    warnings: List[str] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)
    wall_time: float = 0.0
