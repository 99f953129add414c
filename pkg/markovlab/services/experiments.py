"""Monte Carlo experiments: figure panels, rate fits and the lemma suite.

Each trial owns an RngStream keyed by (experiment panel, trial, n), so results
do not depend on the number of workers. Records are sorted before aggregation
and output.
"""
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from markovlab.exceptions import ConfigError, ConvergenceError, ReducibleError
from markovlab.config import settings
from markovlab.models import (
    AggregateRecord,
    ConstantTheta,
    ExperimentConfig,
    InversePowerLaw,
    LemmaRow,
    RateFit,
    RateReport,
    RunManifest,
    TrialRecord,
    VertexWeightSpec,
    WeightLaw,
)
from markovlab.services.markov_builders import (
    KernelMatrix,
    ProbabilityVector,
    WeightedDigraph,
    build_adjacency,
    build_generator,
    build_jump_kernel,
    build_kernel,
    check_primitive,
    exit_rates,
    reciprocal_distribution,
)
from markovlab.services.metrics import (
    chernoff_bound,
    compute_lemma_statistics,
    descending_scaled,
    empirical_lower_tail,
    jump_sandwich_bound,
    loglog_slope,
    theorem_exponent,
    tv_distance,
)
from markovlab.services.stationary_solvers import (
    SolveReport,
    residual,
    stationary_direct,
    stationary_kernel_power,
)
from markovlab.services.weight_models import (
    RngStream,
    format_law,
    has_finite_moment,
    law_moments,
    sample_edges,
    sample_vertex_weights,
)
from markovlab.utils.fileops import write_frame, atomic_write_text
from markovlab.utils.logger import get_logger
from markovlab.utils.memory_manager import get_memory_manager

logger = get_logger(__name__)

CSV_COLUMNS = ["experiment", "n", "alpha", "trial", "metric", "value", "std"]
SKIPPED = "skipped: moment precondition"
# slack on band and monotonicity comparisons of medians
VERDICT_TOL = 1e-9


# Draws and solves

@dataclass(frozen=True)
class Draw:
    g: WeightedDigraph
    rejections: int


def draw_instance(
    law: WeightLaw,
    theta_spec: VertexWeightSpec,
    n: int,
    stream: RngStream,
    theta_stream: Optional[RngStream] = None,
    symmetric: bool = False,
) -> Draw:
    """Sample (theta, X) until A and A-hat are both primitive, counting rejections."""
    rejections = 0
    for _ in range(settings.MAX_REDRAWS + 1):
        X, log_X = sample_edges(law, n, stream, symmetric)
        theta = sample_vertex_weights(theta_spec, n, theta_stream or stream)
        g = build_adjacency(theta, X, log_X)
        if check_primitive(g).is_usable:
            return Draw(g, rejections)
        rejections += 1
        stream = stream.redraw()
    raise ReducibleError(
        f"no primitive draw in {settings.MAX_REDRAWS + 1} attempts for n={n}, law {format_law(law)}"
    )


def solve_kernel(K: KernelMatrix) -> Tuple[SolveReport, int]:
    """Power iteration within the experiment budget, else the direct solver.

    Returns the report and the number of fallbacks (0 or 1).
    """
    try:
        return stationary_kernel_power(K, max_iter=settings.EXPERIMENT_POWER_MAX_ITER), 0
    except ConvergenceError as e:
        logger.warning(f"{e}; falling back to the direct solver (n={K.n})")
        return stationary_direct(K), 1


@dataclass(frozen=True)
class ChainSolution:
    pi_jump: ProbabilityVector
    pi_q: ProbabilityVector
    q: np.ndarray
    residual_jump: float
    residual_q: float
    fallbacks: int


def solve_chain(g: WeightedDigraph) -> ChainSolution:
    """pi_Qhat by power iteration, then pi_Q(i) proportional to pi_Qhat(i) / q_i."""
    report, fallbacks = solve_kernel(build_jump_kernel(g))
    q = exit_rates(g)
    pi_q = ProbabilityVector.normalized(report.pi.values / q)
    Q = build_generator(g)
    return ChainSolution(
        pi_jump=report.pi,
        pi_q=pi_q,
        q=q,
        residual_jump=report.residual,
        residual_q=residual(pi_q.values, Q) / max(np.abs(Q.entries).max(), np.finfo(float).tiny),
        fallbacks=fallbacks,
    )


# Task plumbing

@dataclass(frozen=True)
class Task:
    panel: str
    n: int
    trial: int
    alpha: Optional[float] = None


def run_tasks(fn: Callable[[Task], TrialRecord], tasks: Sequence[Task], threads: int = 1) -> List[TrialRecord]:
    if threads <= 1:
        records = [fn(task) for task in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(fn, tasks))
    return sorted(records, key=TrialRecord.sort_key)


def aggregate(records: Iterable[TrialRecord]) -> List[AggregateRecord]:
    """Mean and population standard deviation per (experiment, panel, n, alpha, metric).

    Records are sorted first, so the result does not depend on their order.
    """
    rows = [
        (r.experiment, r.panel, r.n, -1.0 if r.alpha is None else r.alpha, metric, r.trial, value)
        for r in records
        for metric, value in r.metrics.items()
    ]
    if not rows:
        return []
    frame = pd.DataFrame(rows, columns=["experiment", "panel", "n", "alpha", "metric", "trial", "value"])
    frame = frame.sort_values(["experiment", "panel", "n", "alpha", "metric", "trial"], kind="mergesort")
    grouped = frame.groupby(["experiment", "panel", "n", "alpha", "metric"], sort=True)["value"]
    stats = grouped.agg(mean="mean", std=lambda v: float(np.std(v.to_numpy())), samples="count").reset_index()
    return [
        AggregateRecord(
            experiment=row.experiment,
            panel=row.panel,
            n=int(row.n),
            alpha=None if row.alpha < 0 else float(row.alpha),
            metric=row.metric,
            mean=float(row.mean),
            std=float(row.std),
            count=int(row.samples),
        )
        for row in stats.itertuples(index=False)
    ]


def panel_frame(records: Sequence[TrialRecord], aggregates: Sequence[AggregateRecord]) -> pd.DataFrame:
    rows = []
    for r in sorted(records, key=TrialRecord.sort_key):
        for metric in sorted(r.metrics):
            rows.append((r.experiment, r.n, r.alpha, r.trial, metric, r.metrics[metric], None))
    for a in aggregates:
        rows.append((a.experiment, a.n, a.alpha, "aggregate", a.metric, a.mean, a.std))
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


@dataclass
class PanelOutput:
    records: List[TrialRecord]
    aggregates: List[AggregateRecord]

    def mean(self, metric: str, n: Optional[int] = None, alpha: Optional[float] = None) -> float:
        for a in self.aggregates:
            if a.metric == metric and (n is None or a.n == n) and (alpha is None or a.alpha == alpha):
                return a.mean
        raise KeyError(f"no aggregate {metric!r} for n={n}, alpha={alpha}")

    def means(self, metric: str) -> List[Tuple[int, Optional[float], float]]:
        return [(a.n, a.alpha, a.mean) for a in self.aggregates if a.metric == metric]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    panels: Dict[str, PanelOutput]
    rejections: Dict[str, int] = field(default_factory=dict)
    solver_fallbacks: int = 0
    warnings: List[str] = field(default_factory=list)
    rate: Optional[RateReport] = None
    lemma_rows: Optional[List[LemmaRow]] = None
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return not any(row.verdict == "fail" for row in self.lemma_rows or [])

    def __getitem__(self, panel: str) -> PanelOutput:
        return self.panels[panel]


def _finish(result: ExperimentResult, started: float) -> ExperimentResult:
    for name, panel in result.panels.items():
        for r in panel.records:
            key = f"{name}:n={r.n}" + ("" if r.alpha is None else f":alpha={r.alpha:g}")
            result.rejections[key] = result.rejections.get(key, 0) + r.rejections
            result.solver_fallbacks += int(r.metrics.get("solver_fallbacks", 0))
        groups = sorted({(r.n, r.alpha) for r in panel.records}, key=lambda k: (k[0], k[1] or 0.0))
        for n, alpha in groups:
            label = f"n={n}" + ("" if alpha is None else f" alpha={alpha:g}")
            logger.info(f"{result.config.experiment} {name} {label}: {result.config.trials} trials done")
    result.rejections = dict(sorted(result.rejections.items()))
    result.wall_time = time.perf_counter() - started
    get_memory_manager().monitor_memory_usage(result.config.experiment)
    return result


def _check_law(config: ExperimentConfig) -> None:
    if config.edge_law.degenerate and not config.fixture:
        raise ConfigError("degenerate constant law is only accepted with fixture=true", key="law")


def _streams(config: ExperimentConfig, tag: str, task: Task) -> Tuple[RngStream, Optional[RngStream]]:
    stream = RngStream(config.master_seed, tag, task.trial, task.n)
    theta_stream = RngStream(config.master_seed, f"{tag}:theta", 0, task.n) if config.fix_theta else None
    return stream, theta_stream


def _budget(sizes: Iterable[int], matrices: int, threads: int) -> None:
    get_memory_manager().ensure_dense_budget(max(sizes), matrices, max(threads, 1))


def _curve_metrics(name: str, dist) -> Dict[str, float]:
    return {f"{name}:{rank:04d}": float(v) for rank, v in enumerate(descending_scaled(dist), 1)}


# Theorem 1.2 family: pi_Q against nu_q and nu_theta

def _generator_trial(config: ExperimentConfig, tag: str, theta_spec: VertexWeightSpec, task: Task) -> TrialRecord:
    stream, theta_stream = _streams(config, tag, task)
    draw = draw_instance(config.edge_law, theta_spec, task.n, stream, theta_stream, config.symmetric)
    sol = solve_chain(draw.g)
    nu_q = reciprocal_distribution(sol.q)
    nu_theta = reciprocal_distribution(draw.g.theta)
    u = ProbabilityVector.uniform(task.n)
    metrics = {
        "tv_piQ_nuq": tv_distance(sol.pi_q, nu_q),
        "tv_piQ_nutheta": tv_distance(sol.pi_q, nu_theta),
        "tv_piQ_u": tv_distance(sol.pi_q, u),
        "tv_nuq_nutheta": tv_distance(nu_q, nu_theta),
        "residual_piQhat": sol.residual_jump,
        "residual_piQ": sol.residual_q,
        "solver_fallbacks": float(sol.fallbacks),
    }
    return TrialRecord(experiment=config.experiment, panel=task.panel, n=task.n, trial=task.trial,
                       rejections=draw.rejections, metrics=metrics)


def _generator_curve_trial(config: ExperimentConfig, tag: str, theta_spec: VertexWeightSpec, task: Task) -> TrialRecord:
    stream, theta_stream = _streams(config, tag, task)
    draw = draw_instance(config.edge_law, theta_spec, task.n, stream, theta_stream, config.symmetric)
    sol = solve_chain(draw.g)
    metrics = {"solver_fallbacks": float(sol.fallbacks)}
    metrics.update(_curve_metrics("piQ", sol.pi_q))
    metrics.update(_curve_metrics("nu_q", reciprocal_distribution(sol.q)))
    metrics.update(_curve_metrics("nu_theta", reciprocal_distribution(draw.g.theta)))
    return TrialRecord(experiment=config.experiment, panel=task.panel, n=task.n, trial=task.trial,
                       rejections=draw.rejections, metrics=metrics)


def run_fig1(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Scaled pi_Q, nu_q, nu_theta curves (theta = 1 and config theta) and TV decay in n."""
    _check_law(config)
    started = time.perf_counter()
    _budget((config.panel_n, *config.n_grid), 6, threads)
    warnings = []
    if math.isinf(law_moments(config.edge_law).mean):
        warnings.append("edge law has infinite mean; the nu_theta comparison is not interpretable")
        logger.warning(warnings[-1])

    panels = {}
    curve_specs = (("curves_a", ConstantTheta(c=1.0)), ("curves_b", config.theta))
    for panel, theta_spec in curve_specs:
        tasks = [Task(panel, config.panel_n, t) for t in range(config.trials)]
        fn = lambda task, spec=theta_spec, panel=panel: _generator_curve_trial(config, f"fig1_{panel}", spec, task)
        records = run_tasks(fn, tasks, threads)
        panels[panel] = PanelOutput(records, aggregate(records))

    tasks = [Task("decay_c", n, t) for n in config.n_grid for t in range(config.trials)]
    records = run_tasks(lambda task: _generator_trial(config, "fig1_decay_c", config.theta, task), tasks, threads)
    panels["decay_c"] = PanelOutput(records, aggregate(records))
    return _finish(ExperimentResult(config, panels, warnings=warnings), started)


def fit_rates(panel: PanelOutput, metrics: Sequence[str]) -> List[RateFit]:
    fits = []
    for metric in metrics:
        points = [(n, mean) for n, _, mean in panel.means(metric)]
        slope, intercept, r2 = loglog_slope(points)
        fits.append(RateFit(metric=metric, slope=slope, intercept=intercept, r2=r2))
    return fits


RATE_METRICS = ("tv_piQ_nuq", "tv_piQ_nutheta", "tv_nuq_nutheta")


def run_rate(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Log-log slopes of the mean TV distances of Theorem 1.2 over n_grid."""
    _check_law(config)
    if len(config.n_grid) < 3:
        raise ConfigError("rate fit needs at least 3 grid points", key="n-grid")
    p_max = law_moments(config.edge_law).p_max
    if p_max <= 4:
        raise ConfigError(f"rate experiment needs a finite p-th moment for some p > 4 (p_max={p_max:g})", key="law")
    started = time.perf_counter()
    _budget(config.n_grid, 6, threads)
    warnings = []
    if math.isfinite(p_max):
        warnings.append(f"edge law has finite moments only below order {p_max:g}")

    tasks = [Task("decay", n, t) for n in config.n_grid for t in range(config.trials)]
    records = run_tasks(lambda task: _generator_trial(config, "rate_decay", config.theta, task), tasks, threads)
    panel = PanelOutput(records, aggregate(records))
    report = RateReport(
        n_grid=config.n_grid,
        fits=fit_rates(panel, RATE_METRICS),
        reference_exponent=config.rate_exponent,
        theoretical_bound=theorem_exponent(p_max),
    )
    for fit in report.fits:
        logger.info(f"rate {fit.metric}: slope {fit.slope:.3f} (r2 {fit.r2:.3f}), reference {-config.rate_exponent:g}")
    result = ExperimentResult(config, {"decay": panel}, warnings=warnings, rate=report)
    return _finish(result, started)


# Theorem 1.4 family: uniformity of pi_P, pi_Qhat

def _kernel_curve_trial(config: ExperimentConfig, task: Task) -> TrialRecord:
    stream, theta_stream = _streams(config, "fig2_curve_a", task)
    draw = draw_instance(config.edge_law, config.theta, task.n, stream, theta_stream, config.symmetric)
    report, fallbacks = solve_kernel(build_kernel(draw.g))
    metrics = {"solver_fallbacks": float(fallbacks), "residual_piP": report.residual}
    metrics.update(_curve_metrics("piP", report.pi))
    return TrialRecord(experiment=config.experiment, panel=task.panel, n=task.n, trial=task.trial,
                       rejections=draw.rejections, metrics=metrics)


def _uniformity_trial(config: ExperimentConfig, task: Task) -> TrialRecord:
    stream, theta_stream = _streams(config, "fig2_decay_b", task)
    draw = draw_instance(config.edge_law, config.theta, task.n, stream, theta_stream, config.symmetric)
    u = ProbabilityVector.uniform(task.n)
    kernel, kernel_fallbacks = solve_kernel(build_kernel(draw.g))
    sol = solve_chain(draw.g)
    metrics = {
        "tv_piP_u": tv_distance(kernel.pi, u),
        "tv_piQhat_u": tv_distance(sol.pi_jump, u),
        "residual_piP": kernel.residual,
        "residual_piQhat": sol.residual_jump,
        "solver_fallbacks": float(kernel_fallbacks + sol.fallbacks),
    }
    if isinstance(config.theta, ConstantTheta):
        metrics["tv_piQ_u"] = tv_distance(sol.pi_q, u)
    return TrialRecord(experiment=config.experiment, panel=task.panel, n=task.n, trial=task.trial,
                       rejections=draw.rejections, metrics=metrics)


def _alpha_trial(config: ExperimentConfig, task: Task) -> TrialRecord:
    law = InversePowerLaw(alpha=task.alpha)
    stream = RngStream(config.master_seed, f"fig2_alpha_sweep_c:{task.alpha!r}", task.trial, task.n)
    draw = draw_instance(law, config.theta, task.n, stream, None, config.symmetric)
    report, fallbacks = solve_kernel(build_kernel(draw.g))
    metrics = {
        "tv_piP_u": tv_distance(report.pi, ProbabilityVector.uniform(task.n)),
        "residual_piP": report.residual,
        "solver_fallbacks": float(fallbacks),
    }
    return TrialRecord(experiment=config.experiment, panel=task.panel, n=task.n, alpha=task.alpha,
                       trial=task.trial, rejections=draw.rejections, metrics=metrics)


def run_fig2(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Scaled pi_P curve, TV(pi_P, u) and TV(pi_Qhat, u) decay in n, and the alpha sweep."""
    _check_law(config)
    started = time.perf_counter()
    _budget((config.panel_n, *config.n_grid), 6, threads)
    panels = {}

    tasks = [Task("curve_a", config.panel_n, t) for t in range(config.trials)]
    records = run_tasks(lambda task: _kernel_curve_trial(config, task), tasks, threads)
    panels["curve_a"] = PanelOutput(records, aggregate(records))

    tasks = [Task("decay_b", n, t) for n in config.n_grid for t in range(config.trials)]
    records = run_tasks(lambda task: _uniformity_trial(config, task), tasks, threads)
    panels["decay_b"] = PanelOutput(records, aggregate(records))

    tasks = [Task("alpha_sweep_c", config.panel_n, t, alpha) for alpha in config.alpha_grid for t in range(config.trials)]
    records = run_tasks(lambda task: _alpha_trial(config, task), tasks, threads)
    panels["alpha_sweep_c"] = PanelOutput(records, aggregate(records))
    return _finish(ExperimentResult(config, panels), started)


# Lemma suite

def _lemma_trial(config: ExperimentConfig, task: Task) -> TrialRecord:
    stream, theta_stream = _streams(config, "lemmas_statistics", task)
    draw = draw_instance(config.edge_law, config.theta, task.n, stream, theta_stream, config.symmetric)
    sol = solve_chain(draw.g)
    stats = compute_lemma_statistics(draw.g, build_kernel(draw.g), sol.pi_jump, law_moments(config.edge_law).mean)
    metrics = {k: v for k, v in stats.model_dump(exclude={"n"}).items() if v is not None}
    metrics["tv_piQ_nuq"] = tv_distance(sol.pi_q, reciprocal_distribution(sol.q))
    metrics["sandwich_bound"] = jump_sandwich_bound(sol.pi_jump)
    metrics["solver_fallbacks"] = float(sol.fallbacks)
    return TrialRecord(experiment=config.experiment, panel=task.panel, n=task.n, trial=task.trial,
                       rejections=draw.rejections, metrics=metrics)


def _medians(records: Sequence[TrialRecord], metric: str, scale: Callable[[int], float]) -> Dict[int, float]:
    by_n: Dict[int, List[float]] = {}
    for r in records:
        if metric in r.metrics:
            by_n.setdefault(r.n, []).append(r.metrics[metric] * scale(r.n))
    return {n: float(np.median(v)) for n, v in sorted(by_n.items())}


def _skipped(lemma: str, grid: Sequence[int]) -> List[LemmaRow]:
    return [LemmaRow(lemma=lemma, n=n, verdict=SKIPPED) for n in grid]


def _non_increasing(lemma: str, medians: Dict[int, float]) -> List[LemmaRow]:
    rows, previous = [], None
    for n, value in medians.items():
        ok = previous is None or value <= previous + VERDICT_TOL * max(1.0, abs(previous))
        rows.append(LemmaRow(lemma=lemma, n=n, statistic=value, threshold=previous, verdict="pass" if ok else "fail"))
        previous = value
    return rows


def _capped(lemma: str, medians: Dict[int, float], cap: float) -> List[LemmaRow]:
    return [
        LemmaRow(lemma=lemma, n=n, statistic=v, threshold=cap, verdict="pass" if v <= cap else "fail")
        for n, v in medians.items()
    ]


def lemma_rows(config: ExperimentConfig, records: Sequence[TrialRecord], tail_rows: List[LemmaRow]) -> List[LemmaRow]:
    """Turn per-draw statistics into one verdict row per (lemma, n)."""
    law = config.edge_law
    grid = config.n_grid
    rows: List[LemmaRow] = []

    # maximal strong law: centered row sums are o(n)
    if has_finite_moment(law, 1):
        rows += _non_increasing("lemma_2.1_centered_rowsum", _medians(records, "max_centered_rowsum", lambda n: 1.0 / n))
    else:
        rows += _skipped("lemma_2.1_centered_rowsum", grid)

    rows += tail_rows

    # squared row norms of the kernel are O(1/n)
    if has_finite_moment(law, 4):
        medians = _medians(records, "max_row_l2", lambda n: n)
        threshold = config.l2_spread_factor * min(medians.values())
        rows += [
            LemmaRow(lemma="lemma_2.3_row_l2", n=n, statistic=v, threshold=threshold,
                     verdict="pass" if v <= threshold else "fail")
            for n, v in medians.items()
        ]
        a = config.max_entry_exponent
        rows += _capped("lemma_2.4_max_entry", _medians(records, "max_entry", lambda n: n**a), config.max_entry_cap)
        a = config.jump_gap_exponent
        rows += _capped("lemma_3.1_jump_uniformity",
                        _medians(records, "linf_jump_gap", lambda n: n ** (1 + a)), config.jump_gap_cap)
        rows += _non_increasing("rowsum_concentration", _medians(records, "rowsum_deviation", lambda n: 1.0))
    else:
        for lemma in ("lemma_2.3_row_l2", "lemma_2.4_max_entry", "lemma_3.1_jump_uniformity", "rowsum_concentration"):
            rows += _skipped(lemma, grid)

    # two-step kernels: min entry is (1 - o(1)) / n
    if has_finite_moment(law, 2):
        previous = None
        for n, v in _medians(records, "min_two_step", lambda n: n).items():
            in_band = config.two_step_low - VERDICT_TOL <= v <= config.two_step_high + VERDICT_TOL
            rising = previous is None or v >= previous - VERDICT_TOL
            rows.append(LemmaRow(lemma="two_step_lower_bound", n=n, statistic=v, threshold=config.two_step_low,
                                 verdict="pass" if in_band and rising else "fail"))
            previous = v
    else:
        rows += _skipped("two_step_lower_bound", grid)

    # deterministic: TV(pi_Q, nu_q) never exceeds the sandwich bound
    by_n: Dict[int, float] = {}
    for r in records:
        gap = r.metrics["tv_piQ_nuq"] - r.metrics["sandwich_bound"]
        by_n[r.n] = max(by_n.get(r.n, -math.inf), gap)
    rows += [
        LemmaRow(lemma="sandwich_bound", n=n, statistic=v, threshold=1e-12, verdict="pass" if v <= 1e-12 else "fail")
        for n, v in sorted(by_n.items())
    ]
    return rows


def lower_tail_rows(config: ExperimentConfig) -> List[LemmaRow]:
    """Closed-form lower-tail bound against Monte Carlo frequencies."""
    law = config.edge_law
    mu, variance, _ = law_moments(law)
    if not (has_finite_moment(law, 2) and variance > 0):
        return [
            LemmaRow(lemma="lemma_2.2_lower_tail", n=n, epsilon=eps, verdict=SKIPPED)
            for n in config.tail_n_grid for eps in config.epsilon_grid
        ]
    rows = []
    for n in config.tail_n_grid:
        for eps in config.epsilon_grid:
            stream = RngStream(config.master_seed, f"lemmas_tail:{eps!r}", 0, n)
            freq = empirical_lower_tail(law, n, eps, config.tail_trials, stream)
            bound = chernoff_bound(mu, variance, n, eps)
            threshold = bound + 3.0 * math.sqrt(bound / config.tail_trials)
            rows.append(LemmaRow(lemma="lemma_2.2_lower_tail", n=n, epsilon=eps, statistic=freq,
                                 threshold=threshold, verdict="pass" if freq <= threshold else "fail"))
    return rows


def run_lemma_suite(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    _check_law(config)
    started = time.perf_counter()
    _budget(config.n_grid, 9, threads)
    tasks = [Task("statistics", n, t) for n in config.n_grid for t in range(config.trials)]
    records = run_tasks(lambda task: _lemma_trial(config, task), tasks, threads)
    rows = lemma_rows(config, records, lower_tail_rows(config))
    for row in rows:
        if row.verdict != "pass":
            logger.info(f"lemmas {row.lemma} n={row.n}: {row.verdict}")
    result = ExperimentResult(config, {"statistics": PanelOutput(records, aggregate(records))}, lemma_rows=rows)
    return _finish(result, started)


RUNNERS = {
    "fig1": run_fig1,
    "fig2": run_fig2,
    "rate": run_rate,
    "lemmas": run_lemma_suite,
}


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    return RUNNERS[config.experiment](config, threads)


# Output

def write_result(result: ExperimentResult, out_dir: str, version: str) -> RunManifest:
    """Write `<experiment>_<panel>.csv` files and `<experiment>_manifest.json` atomically."""
    experiment = result.config.experiment
    files = []
    for name, panel in result.panels.items():
        filename = f"{experiment}_{name}.csv"
        write_frame(out_dir, filename, panel_frame(panel.records, panel.aggregates))
        files.append(filename)
    if result.rate is not None:
        rows = []
        for fit in result.rate.fits:
            for key in ("slope", "intercept", "r2"):
                rows.append((experiment, None, None, "fit", f"{fit.metric}:{key}", getattr(fit, key), None))
        rows.append((experiment, None, None, "fit", "reference:slope", -result.rate.reference_exponent, None))
        if result.rate.theoretical_bound is not None:
            rows.append((experiment, None, None, "fit", "theory:slope_bound", -result.rate.theoretical_bound, None))
        filename = f"{experiment}_fit.csv"
        write_frame(out_dir, filename, pd.DataFrame(rows, columns=CSV_COLUMNS))
        files.append(filename)
    if result.lemma_rows is not None:
        filename = f"{experiment}_table.csv"
        table = pd.DataFrame([row.model_dump() for row in result.lemma_rows],
                             columns=["lemma", "n", "epsilon", "statistic", "threshold", "verdict"])
        write_frame(out_dir, filename, table)
        files.append(filename)

    manifest = RunManifest(
        config=result.config,
        master_seed=result.config.master_seed,
        version=version,
        rejections=result.rejections,
        solver_fallbacks=result.solver_fallbacks,
        warnings=result.warnings,
        files=files,
        wall_time=result.wall_time,
    )
    atomic_write_text(out_dir, f"{experiment}_manifest.json", manifest.model_dump_json(indent=2) + "\n")
    return manifest
