"""Flags and config resolution shared by the subcommands."""
import argparse
import json
from typing import Any, Callable, Dict, Optional, Tuple

from pydantic import ValidationError

from markovlab.config import settings
from markovlab.exceptions import ConfigError, LawSpecError
from markovlab.models import ExperimentConfig, ExponentialLaw, IidTheta
from markovlab.services.markov_builders import WeightedDigraph, build_adjacency
from markovlab.services.weight_models import (
    RngStream,
    format_law,
    format_theta,
    parse_law,
    parse_theta,
    sample_edges,
    sample_vertex_weights,
)


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _ints(text: str):
    return tuple(int(v) for v in text.split(","))


def _floats(text: str):
    return tuple(float(v) for v in text.split(","))


# config-file key -> (ExperimentConfig field, value parser)
CONFIG_KEYS: Dict[str, tuple] = {
    "experiment": ("experiment", str.strip),
    "law": ("edge_law", parse_law),
    "edge_law": ("edge_law", parse_law),
    "theta": ("theta", parse_theta),
    "seed": ("master_seed", int),
    "master_seed": ("master_seed", int),
    "trials": ("trials", int),
    "n_grid": ("n_grid", _ints),
    "alpha_grid": ("alpha_grid", _floats),
    "panel_n": ("panel_n", int),
    "fix_theta": ("fix_theta", _bool),
    "symmetric": ("symmetric", _bool),
    "fixture": ("fixture", _bool),
    "rate_exponent": ("rate_exponent", float),
    "epsilon_grid": ("epsilon_grid", _floats),
    "tail_n_grid": ("tail_n_grid", _ints),
    "tail_trials": ("tail_trials", int),
    "l2_spread_factor": ("l2_spread_factor", float),
    "two_step_low": ("two_step_low", float),
    "two_step_high": ("two_step_high", float),
    "jump_gap_exponent": ("jump_gap_exponent", float),
    "jump_gap_cap": ("jump_gap_cap", float),
    "max_entry_exponent": ("max_entry_exponent", float),
    "max_entry_cap": ("max_entry_cap", float),
}


def _read_key_values(text: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError("expected key=value", line=lineno)
        key = key.strip().lower().replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        field, parse = CONFIG_KEYS[key]
        try:
            values[field] = parse(value.strip())
        except LawSpecError as e:
            raise ConfigError(str(e), key=key, line=lineno) from None
        except ConfigError as e:
            raise ConfigError(str(e), line=lineno) from None
        except ValueError as e:
            raise ConfigError(f"type mismatch ({e})", key=key, line=lineno) from None
    return values


def read_config_file(path: str) -> Dict[str, Any]:
    """key=value text, or a JSON run manifest whose `config` is reused."""
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e.strerror}", key=path) from None
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON ({e.msg})", key=path, line=e.lineno) from None
        return dict(data.get("config", data))
    return _read_key_values(text)


# ExperimentConfig field -> the flag that sets it
FIELD_FLAGS: Dict[str, str] = {
    "edge_law": "--law",
    "theta": "--theta",
    "master_seed": "--seed",
    "symmetric": "--symmetric",
    "trials": "--trials",
    "n_grid": "--n-grid",
    "alpha_grid": "--alpha-grid",
    "panel_n": "--panel-n",
    "fix_theta": "--fix-theta",
}


def resolve_config(values: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        loc = [str(part) for part in error["loc"]]
        key = None
        if loc:
            key = ".".join([FIELD_FLAGS.get(loc[0], loc[0]), *loc[1:]])
        raise ConfigError(error["msg"], key=key) from None


def load_config(
    path: Optional[str] = None,
    experiment: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """Defaults, then the config file, then explicit overrides (flags win)."""
    values: Dict[str, Any] = {"master_seed": settings.SEED}
    if path is not None:
        values.update(read_config_file(path))
    if experiment is not None:
        values["experiment"] = experiment
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if "experiment" not in values:
        raise ConfigError("no experiment given", key="experiment")
    return resolve_config(values)


# argparse types

def _flag_type(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def convert(text: str):
        try:
            return parse(text)
        except ConfigError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    convert.__name__ = parse.__name__
    return convert


law_flag = _flag_type(parse_law)
theta_flag = _flag_type(parse_theta)


def positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def int_list(text: str):
    try:
        return _ints(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def float_list(text: str):
    try:
        return _floats(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def add_draw_flags(parser: argparse.ArgumentParser) -> None:
    """--law, --theta, --seed, --symmetric: flags that pick a random instance."""
    parser.add_argument("--law", type=law_flag, default=None, help="edge-weight law, e.g. exp:1 or invpow:2.5")
    parser.add_argument("--theta", type=theta_flag, default=None, help="const:<c>, iid:<law> or explicit:<v1,...>")
    parser.add_argument("--seed", type=int, default=None, help="master seed (default MARKOVLAB_SEED)")
    parser.add_argument("--symmetric", action="store_true", default=None, help="mirror X onto its upper triangle")


def add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    add_draw_flags(parser)
    parser.add_argument("--config", default=None, help="key=value file or JSON manifest")
    parser.add_argument("--trials", type=positive_int, default=None)
    parser.add_argument("--n-grid", type=int_list, default=None)
    parser.add_argument("--alpha-grid", type=float_list, default=None)
    parser.add_argument("--panel-n", type=int, default=None)
    parser.add_argument("--fix-theta", action="store_true", default=None, help="draw theta once per n")
    parser.add_argument("--out-dir", default=settings.OUT_DIR)
    parser.add_argument("--threads", type=positive_int, default=settings.THREADS)


def experiment_config(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    overrides = {
        "edge_law": args.law,
        "theta": args.theta,
        "master_seed": args.seed,
        "symmetric": args.symmetric,
        "trials": args.trials,
        "n_grid": args.n_grid,
        "alpha_grid": args.alpha_grid,
        "panel_n": args.panel_n,
        "fix_theta": args.fix_theta,
    }
    return load_config(args.config, experiment, overrides)


def draw_graph(args: argparse.Namespace) -> Tuple[WeightedDigraph, str, str, int]:
    """The instance named by --n/--law/--theta/--seed, shared by gen and solve.

    Returns the digraph and the law, theta and seed it was drawn with.
    """
    if args.n is None:
        raise ConfigError("required unless --matrix is given", key="--n")
    if args.n < 2 or args.n > settings.MAX_N:
        raise ConfigError(f"must lie in [2, {settings.MAX_N}], got {args.n}", key="--n")
    law = args.law or ExponentialLaw()
    theta_spec = args.theta or IidTheta(law=ExponentialLaw())
    seed = settings.SEED if args.seed is None else args.seed
    stream = RngStream(seed, "cli", 0, args.n)
    X, log_X = sample_edges(law, args.n, stream, args.symmetric)
    g = build_adjacency(sample_vertex_weights(theta_spec, args.n, stream), X, log_X)
    return g, format_law(law), format_theta(theta_spec), seed
