"""End-to-end checks of the published claims at the sizes they are stated for.

The exact oracle checks are fast; the trend checks run full experiment grids
and are marked slow.
"""
import json
import math

import numpy as np
import pytest

from markovlab.models import ConstantTheta, ExperimentConfig, ExponentialLaw, IidTheta
from markovlab.services.experiments import run_fig2, run_lemma_suite, run_rate, write_result
from markovlab.services.markov_builders import (
    build_generator,
    build_jump_kernel,
    build_kernel,
    exit_rates,
)
from markovlab.services.stationary_solvers import (
    stationary_direct,
    stationary_generator,
    stationary_kernel_power,
    stationary_tree_oracle,
)

GRID = (100, 200, 400, 800, 1600)


class TestExactOracles:
    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_four_solvers_agree(self, make_graph, n):
        for seed in range(50):
            Q = build_generator(make_graph(n, seed=seed))
            solutions = [
                stationary_generator(Q, "via_jump").pi.values,
                stationary_direct(Q).pi.values,
                stationary_tree_oracle(Q, "cofactor").pi.values,
                stationary_tree_oracle(Q, "enumeration").pi.values,
            ]
            for a in solutions:
                for b in solutions:
                    assert np.abs(a - b).max() <= 1e-9

    @pytest.mark.parametrize("n", [10, 100])
    def test_jump_identity(self, make_graph, n):
        for seed in range(20):
            g = make_graph(n, seed=seed)
            jump = stationary_kernel_power(build_jump_kernel(g)).pi.values / exit_rates(g)
            jump /= jump.sum()
            direct = stationary_direct(build_generator(g)).pi.values
            assert np.abs(jump - direct).max() <= 1e-10

    @pytest.mark.parametrize("n", [10, 500])
    def test_eulerian_kernel(self, make_graph, n):
        g = make_graph(n, seed=1, theta=np.ones(n), symmetric=True)
        rows = g.X.sum(axis=1)
        P = build_kernel(g)
        for report in (stationary_kernel_power(P), stationary_direct(P)):
            assert np.abs(report.pi.values - rows / rows.sum()).max() <= 1e-12


def strictly_decreasing(values):
    return all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.slow
class TestTrends:
    def test_generator_rate(self):
        config = ExperimentConfig(experiment="rate", theta=IidTheta(law=ExponentialLaw()), n_grid=GRID, master_seed=1)
        result = run_rate(config)
        panel = result["decay"]
        for metric in ("tv_piQ_nuq", "tv_piQ_nutheta"):
            assert strictly_decreasing([mean for _, _, mean in panel.means(metric)])
        for fit in result.rate.fits[:2]:
            assert fit.slope <= -0.35
            assert fit.r2 >= 0.9

    def test_kernel_uniformity_and_alpha_sweep(self):
        config = ExperimentConfig(
            experiment="fig2", theta=ConstantTheta(c=1.0), n_grid=GRID, alpha_grid=(0.5, 1.0, 2.0, 4.0), master_seed=2
        )
        result = run_fig2(config)
        decay = result["decay_b"]
        for metric in ("tv_piP_u", "tv_piQhat_u", "tv_piQ_u"):
            assert strictly_decreasing([mean for _, _, mean in decay.means(metric)])
        assert decay.mean("tv_piP_u", n=1600) < 0.02

        sweep = [mean for _, _, mean in result["alpha_sweep_c"].means("tv_piP_u")]
        assert strictly_decreasing(sweep)
        assert sweep[-1] / sweep[0] < 0.5

    def test_lemma_envelopes(self):
        result = run_lemma_suite(ExperimentConfig(experiment="lemmas", master_seed=3))
        verdicts = {}
        for row in result.lemma_rows:
            verdicts.setdefault(row.lemma, []).append(row.verdict)
        for lemma in (
            "lemma_2.1_centered_rowsum",
            "lemma_2.2_lower_tail",
            "lemma_2.3_row_l2",
            "two_step_lower_bound",
            "lemma_3.1_jump_uniformity",
            "sandwich_bound",
        ):
            assert set(verdicts[lemma]) == {"pass"}, lemma
        tail = [row for row in result.lemma_rows if row.lemma == "lemma_2.2_lower_tail"]
        assert len(tail) == 9
        for row in tail:
            bound = math.exp(-row.epsilon**2 * row.n / 4.0)
            assert row.statistic <= bound + 3.0 * math.sqrt(bound / 100_000)

    def test_rerun_is_byte_identical(self, tmp_path):
        config = ExperimentConfig(experiment="rate", n_grid=(100, 200, 400), trials=4, master_seed=9)
        one, four = tmp_path / "one", tmp_path / "four"
        write_result(run_rate(config, threads=1), str(one), "test")
        write_result(run_rate(config, threads=4), str(four), "test")
        for name in ("rate_decay.csv", "rate_fit.csv"):
            assert (one / name).read_bytes() == (four / name).read_bytes()
        m1 = json.loads((one / "rate_manifest.json").read_text())
        m4 = json.loads((four / "rate_manifest.json").read_text())
        m1.pop("wall_time"), m4.pop("wall_time")
        assert m1 == m4
