import numpy as np
import pytest

from markovlab.models import ExperimentConfig, ExponentialLaw, IidTheta
from markovlab.services.markov_builders import build_adjacency
from markovlab.services.weight_models import RngStream, sample_edges, sample_vertex_weights


@pytest.fixture
def exp1():
    return ExponentialLaw(rate=1.0)


@pytest.fixture
def make_graph():
    """Seeded Exp(1) instance with Exp(1) vertex weights unless told otherwise."""

    def build(n, seed=0, law=None, theta=None, symmetric=False):
        law = law or ExponentialLaw()
        stream = RngStream(seed, "tests", 0, n)
        X, log_X = sample_edges(law, n, stream, symmetric)
        if theta is None:
            theta = sample_vertex_weights(IidTheta(law=ExponentialLaw()), n, stream)
        return build_adjacency(np.asarray(theta, dtype=float), X, log_X)

    return build


@pytest.fixture
def small_config():
    """Fast experiment configs: tiny grids and two trials."""

    def build(experiment, **overrides):
        values = dict(
            experiment=experiment,
            n_grid=(20, 40, 80),
            panel_n=20,
            trials=2,
            master_seed=11,
            alpha_grid=(0.5, 2.0),
            tail_n_grid=(20, 40),
            tail_trials=2000,
        )
        values.update(overrides)
        return ExperimentConfig(**values)

    return build
