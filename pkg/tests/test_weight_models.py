import math

import numpy as np
import pytest
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
)
from markovlab.services.weight_models import (
    RngStream,
    format_law,
    format_theta,
    has_finite_moment,
    law_moments,
    law_raw_moment,
    parse_law,
    parse_theta,
    sample_edge_log_matrix,
    sample_edge_matrix,
    sample_edges,
    sample_law,
    sample_vertex_weights,
    symmetrize_edges,
)


class TestLawMoments:
    def test_exponential(self):
        assert law_moments(ExponentialLaw(rate=1.0)) == (1.0, 1.0, math.inf)
        mean, variance, _ = law_moments(ExponentialLaw(rate=2.0))
        assert mean == pytest.approx(0.5)
        assert variance == pytest.approx(0.25)

    def test_inverse_power_finite_below_alpha(self):
        mean, variance, p_max = law_moments(InversePowerLaw(alpha=3.0))
        assert mean == pytest.approx(gamma(2.0 / 3.0))
        assert variance == pytest.approx(gamma(1.0 / 3.0) - gamma(2.0 / 3.0) ** 2)
        assert p_max == 3.0

    def test_inverse_power_infinite_mean(self):
        mean, variance, _ = law_moments(InversePowerLaw(alpha=1.0))
        assert math.isinf(mean)
        assert math.isinf(variance)

    def test_bernoulli_mix_scales_raw_moments(self):
        law = BernoulliMixLaw(p=0.5, base=ExponentialLaw())
        mean, variance, p_max = law_moments(law)
        assert mean == pytest.approx(0.5)
        assert variance == pytest.approx(0.75)
        assert p_max == math.inf

    @pytest.mark.parametrize(
        "law, var_rel",
        [
            (ExponentialLaw(rate=2.0), 0.02),
            (InversePowerLaw(alpha=5.0), 0.1),
            (BernoulliMixLaw(p=0.3, base=ExponentialLaw()), 0.02),
            (BernoulliMixLaw(p=0.6, base=InversePowerLaw(alpha=6.0)), 0.06),
        ],
    )
    def test_moments_match_monte_carlo(self, law, var_rel):
        x = sample_law(law, 10**6, RngStream(21, "moments").generator("mc"))
        mean, variance, _ = law_moments(law)
        assert x.mean() == pytest.approx(mean, rel=0.01)
        assert x.var() == pytest.approx(variance, rel=var_rel)

    def test_constant_has_zero_variance(self):
        assert law_moments(ConstantLaw(c=2.0)) == (2.0, 0.0, math.inf)

    def test_has_finite_moment_excludes_p_max(self):
        assert not has_finite_moment(InversePowerLaw(alpha=4.0), 4)
        assert has_finite_moment(InversePowerLaw(alpha=4.5), 4)
        assert has_finite_moment(ExponentialLaw(), 10)

    def test_raw_moment(self):
        assert law_raw_moment(ExponentialLaw(), 3) == pytest.approx(6.0)
        assert math.isinf(law_raw_moment(InversePowerLaw(alpha=2.0), 2))


class TestRngStream:
    def test_same_key_same_draws(self, exp1):
        a = sample_edge_matrix(exp1, 5, RngStream(3, "x", 1, 5))
        b = sample_edge_matrix(exp1, 5, RngStream(3, "x", 1, 5))
        np.testing.assert_array_equal(a, b)

    def test_key_components_separate_streams(self, exp1):
        base = sample_edge_matrix(exp1, 5, RngStream(3, "x", 1, 5))
        for other in (RngStream(4, "x", 1, 5), RngStream(3, "y", 1, 5), RngStream(3, "x", 2, 5)):
            assert not np.array_equal(base, sample_edge_matrix(exp1, 5, other))

    def test_redraw_moves_to_a_new_substream(self, exp1):
        stream = RngStream(3, "x", 1, 5)
        assert stream.redraw().attempt == 1
        assert not np.array_equal(
            sample_edge_matrix(exp1, 5, stream), sample_edge_matrix(exp1, 5, stream.redraw())
        )

    def test_lanes_are_independent(self):
        stream = RngStream(3, "x", 1, 5)
        assert stream.generator("edges").random() != stream.generator("theta").random()

    @pytest.mark.parametrize(
        "other",
        [RngStream(8, "b", 0, 300), RngStream(8, "a", 1, 300), RngStream(9, "a", 0, 300), RngStream(8, "a", 0, 300, 1)],
    )
    def test_distinct_streams_are_uncorrelated(self, exp1, other):
        a = sample_edge_matrix(exp1, 300, RngStream(8, "a", 0, 300)).ravel()
        b = sample_edge_matrix(exp1, 300, other).ravel()
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.02

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_must_fit_64_bits(self, seed):
        with pytest.raises(ConfigError):
            RngStream(seed)


class TestSampling:
    def test_edge_matrix_needs_two_vertices(self, exp1):
        with pytest.raises(DimensionError):
            sample_edge_matrix(exp1, 1, RngStream(0))

    def test_exponential_sample_mean(self):
        X = sample_edge_matrix(ExponentialLaw(rate=2.0), 200, RngStream(1, "mean", 0, 200))
        assert X.mean() == pytest.approx(0.5, abs=0.02)

    def test_inverse_power_tail(self):
        """P(X > t) = 1 - exp(-t^-alpha) for X = Y^(-1/alpha), Y ~ Exp(1)."""
        X = sample_edge_matrix(InversePowerLaw(alpha=2.0), 200, RngStream(1, "tail", 0, 200))
        expected = 1.0 - math.exp(-(2.0**-2.0))
        assert (X > 2.0).mean() == pytest.approx(expected, abs=0.01)
        assert np.all(np.isfinite(X)) and np.all(X > 0)

    def test_bernoulli_mix_zero_fraction(self):
        law = BernoulliMixLaw(p=0.3, base=ExponentialLaw())
        X = sample_edge_matrix(law, 200, RngStream(2, "bern", 0, 200))
        assert (X == 0).mean() == pytest.approx(0.7, abs=0.01)

    @pytest.mark.parametrize(
        "law",
        [ExponentialLaw(), InversePowerLaw(alpha=1.5), BernoulliMixLaw(p=0.5, base=ExponentialLaw())],
    )
    def test_entries_non_negative_with_a_positive_one(self, law):
        for seed in range(100):
            X = sample_edge_matrix(law, 10, RngStream(seed, "support", 0, 10))
            assert np.all(X >= 0)
            assert np.any(X > 0)

    def test_overflowing_draws_come_with_log_weights(self):
        law = InversePowerLaw(alpha=0.002)
        stream = RngStream(6, "overflow", 0, 40)
        X, log_X = sample_edges(law, 40, stream)
        assert np.isinf(X).any()
        np.testing.assert_array_equal(log_X, sample_edge_log_matrix(law, 40, stream))
        finite = np.isfinite(X)
        np.testing.assert_array_equal(X[finite], np.exp(log_X[finite]))
        assert np.isfinite(log_X).all()

    def test_light_tailed_draws_have_no_log_weights(self, exp1):
        X, log_X = sample_edges(exp1, 20, RngStream(6, "light", 0, 20), symmetric=True)
        assert log_X is None
        np.testing.assert_array_equal(X, X.T)

    def test_overflowing_theta_is_rejected(self):
        with pytest.raises(NonFiniteWeightError):
            sample_vertex_weights(IidTheta(law=InversePowerLaw(alpha=0.002)), 100, RngStream(0, "theta", 0, 100))

    def test_constant_theta(self):
        theta = sample_vertex_weights(ConstantTheta(c=2.0), 4, RngStream(0))
        np.testing.assert_array_equal(theta, [2.0, 2.0, 2.0, 2.0])

    def test_iid_theta_is_positive(self):
        spec = IidTheta(law=InversePowerLaw(alpha=0.5))
        theta = sample_vertex_weights(spec, 1000, RngStream(5, "theta", 0, 1000))
        assert np.all(theta > 0)

    def test_explicit_theta_length(self):
        with pytest.raises(DimensionError):
            sample_vertex_weights(ExplicitTheta(values=(1.0, 2.0)), 3, RngStream(0))

    def test_explicit_theta_positivity(self):
        with pytest.raises(ConfigError):
            sample_vertex_weights(ExplicitTheta(values=(1.0, 0.0, 2.0)), 3, RngStream(0))

    def test_iid_theta_rejects_atoms_at_zero(self):
        with pytest.raises(ValueError):
            IidTheta(law=BernoulliMixLaw(p=0.5, base=ExponentialLaw()))

    def test_symmetrize_keeps_upper_triangle(self, exp1):
        X = sample_edge_matrix(exp1, 6, RngStream(9))
        S = symmetrize_edges(X)
        np.testing.assert_array_equal(S, S.T)
        np.testing.assert_array_equal(np.triu(S), np.triu(X))


class TestLawGrammar:
    @pytest.mark.parametrize(
        "text, law",
        [
            ("exp:1", ExponentialLaw(rate=1.0)),
            ("invpow:2.5", InversePowerLaw(alpha=2.5)),
            ("const:3", ConstantLaw(c=3.0)),
            ("bern:0.3:invpow:2", BernoulliMixLaw(p=0.3, base=InversePowerLaw(alpha=2.0))),
            ("bern:0.5:bern:0.5:exp:2", BernoulliMixLaw(p=0.5, base=BernoulliMixLaw(p=0.5, base=ExponentialLaw(rate=2.0)))),
        ],
    )
    def test_parse_and_format(self, text, law):
        assert parse_law(text) == law
        assert parse_law(format_law(law)) == law

    @pytest.mark.parametrize("text", ["gauss:1", "exp", "exp:", "exp:-1", "exp:abc", "invpow:0", "bern:1.5:exp:1", "bern:0.5", "exp:inf"])
    def test_malformed_law(self, text):
        with pytest.raises(LawSpecError) as info:
            parse_law(text)
        assert "valid forms" in str(info.value)

    @pytest.mark.parametrize(
        "law",
        [ExponentialLaw(rate=1.23456789), InversePowerLaw(alpha=0.1), BernoulliMixLaw(p=1 / 3, base=ConstantLaw(c=1e-20))],
    )
    def test_format_keeps_every_digit(self, law):
        assert parse_law(format_law(law)) == law

    def test_format_theta_keeps_every_digit(self):
        spec = ExplicitTheta(values=(1.0, 0.1, 2.718281828459045))
        assert format_theta(spec) == "explicit:1,0.1,2.718281828459045"
        assert parse_theta(format_theta(spec)) == spec
        assert format_law(ExponentialLaw(rate=1.23456789)) == "exp:1.23456789"

    def test_theta_forms(self):
        assert parse_theta("const:1") == ConstantTheta(c=1.0)
        assert parse_theta("iid:exp:1") == IidTheta(law=ExponentialLaw())
        assert parse_theta("explicit:1,2,3") == ExplicitTheta(values=(1.0, 2.0, 3.0))
        assert format_theta(parse_theta("iid:invpow:3")) == "iid:invpow:3"

    @pytest.mark.parametrize("text", ["const", "const:x", "iid:bern:0.5:exp:1", "explicit:1,a", "dirichlet:1"])
    def test_malformed_theta(self, text):
        with pytest.raises(ConfigError):
            parse_theta(text)
