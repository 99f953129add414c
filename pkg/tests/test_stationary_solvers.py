import numpy as np
import pytest

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
    build_adjacency,
    build_generator,
    build_jump_kernel,
    build_kernel,
    exit_rates,
)
from markovlab.services.stationary_solvers import (
    residual,
    stationary_direct,
    stationary_generator,
    stationary_kernel_power,
    stationary_tree_oracle,
)


def two_state(a, b):
    g = build_adjacency(np.ones(2), np.array([[0.0, a], [b, 0.0]]))
    return g, np.array([b, a]) / (a + b)


class TestTwoStateChain:
    """pi_Q = (b, a) / (a + b) for rates a: 1 -> 2 and b: 2 -> 1."""

    @pytest.mark.parametrize("method", ["via_jump", "direct"])
    def test_generator_methods(self, method):
        g, expected = two_state(2.0, 3.0)
        report = stationary_generator(build_generator(g), method)
        np.testing.assert_allclose(report.pi.values, expected, atol=1e-12)

    @pytest.mark.parametrize("mode", ["cofactor", "enumeration"])
    def test_tree_oracle(self, mode):
        g, expected = two_state(2.0, 3.0)
        report = stationary_tree_oracle(build_generator(g), mode)
        np.testing.assert_allclose(report.pi.values, expected, atol=1e-12)
        assert report.method == f"tree_{mode}"

    def test_periodic_jump_chain_still_converges(self):
        g, _ = two_state(2.0, 3.0)
        report = stationary_kernel_power(build_jump_kernel(g))
        np.testing.assert_allclose(report.pi.values, [0.5, 0.5], atol=1e-13)


class TestAgreement:
    @pytest.mark.parametrize("n", [3, 4, 5, 6])
    def test_all_methods_agree_on_generator(self, make_graph, n):
        Q = build_generator(make_graph(n, seed=n))
        reference = stationary_tree_oracle(Q, "enumeration").pi.values
        for report in (
            stationary_generator(Q, "via_jump"),
            stationary_direct(Q),
            stationary_tree_oracle(Q, "cofactor"),
        ):
            np.testing.assert_allclose(report.pi.values, reference, atol=1e-9)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_all_methods_agree_on_kernel(self, make_graph, n):
        P = build_kernel(make_graph(n, seed=10 + n))
        reference = stationary_tree_oracle(P, "enumeration").pi.values
        for report in (stationary_kernel_power(P), stationary_direct(P), stationary_tree_oracle(P, "cofactor")):
            np.testing.assert_allclose(report.pi.values, reference, atol=1e-9)

    def test_jump_identity(self, make_graph):
        """pi_Q is proportional to pi_Qhat / q."""
        g = make_graph(40, seed=3)
        jump = stationary_kernel_power(build_jump_kernel(g)).pi.values
        via_jump = jump / exit_rates(g)
        via_jump /= via_jump.sum()
        direct = stationary_direct(build_generator(g)).pi.values
        np.testing.assert_allclose(via_jump, direct, atol=1e-10)

    def test_eulerian_kernel_is_proportional_to_row_sums(self, make_graph):
        g = make_graph(30, seed=4, theta=np.ones(30), symmetric=True)
        rows = g.X.sum(axis=1)
        pi = stationary_kernel_power(build_kernel(g)).pi.values
        np.testing.assert_allclose(pi, rows / rows.sum(), atol=1e-12)

    @pytest.mark.parametrize("n", [10, 200])
    def test_eulerian_kernel_direct(self, make_graph, n):
        g = make_graph(n, seed=7, theta=np.ones(n), symmetric=True)
        rows = g.X.sum(axis=1)
        pi = stationary_direct(build_kernel(g)).pi.values
        np.testing.assert_allclose(pi, rows / rows.sum(), atol=1e-12)

    def test_residuals_are_small(self, make_graph):
        g = make_graph(50, seed=5)
        P = build_kernel(g)
        report = stationary_kernel_power(P)
        assert report.residual <= 1e-12
        assert report.iterations >= 1
        assert residual(report.pi.values, P) == pytest.approx(report.residual)


class TestFailures:
    def test_reducible_kernel(self):
        K = KernelMatrix(np.eye(2))
        with pytest.raises(ReducibleError):
            stationary_kernel_power(K)
        with pytest.raises(ReducibleError):
            stationary_direct(K)

    def test_single_closed_class_is_rejected_by_every_generator_method(self):
        Q = GeneratorMatrix(np.array([[-1.0, 1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]]))
        for method in ("via_jump", "direct"):
            with pytest.raises(ReducibleError):
                stationary_generator(Q, method)
        with pytest.raises(ReducibleError):
            stationary_direct(Q)

    def test_single_closed_class_kernel(self):
        K = KernelMatrix(np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]]))
        with pytest.raises(ReducibleError):
            stationary_direct(K)
        with pytest.raises(ReducibleError):
            stationary_kernel_power(K)

    def test_singular_system(self):
        K = KernelMatrix(np.kron(np.eye(2), np.full((2, 2), 0.5)))
        with pytest.raises((SingularSystemError, ReducibleError)):
            stationary_direct(K)

    def test_singular_error_carries_condition(self):
        error = SingularSystemError(1e20)
        assert error.condition == 1e20
        assert "1.000e+20" in str(error)

    def test_convergence_budget(self, make_graph):
        P = build_kernel(make_graph(5, seed=6))
        with pytest.raises(ConvergenceError) as info:
            stationary_kernel_power(P, tol=1e-300, max_iter=1)
        assert info.value.iterations == 1

    def test_zero_exit_rate(self):
        Q = GeneratorMatrix(np.array([[0.0, 0.0], [1.0, -1.0]]))
        with pytest.raises(IsolatedRowError):
            stationary_generator(Q)

    def test_tree_oracle_size_limits(self, make_graph):
        with pytest.raises(DimensionError):
            stationary_tree_oracle(build_generator(make_graph(7)), "enumeration")
        with pytest.raises(DimensionError):
            stationary_tree_oracle(build_generator(make_graph(65)), "cofactor")
