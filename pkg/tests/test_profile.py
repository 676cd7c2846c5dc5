"""Tests for profiles, domain points and the pointwise predicates."""

import math

import numpy as np
import pytest

from balanced_lab.errors import ConfigError, DomainError, InvalidInputError
from balanced_lab.profile import (
    DomainPoint,
    HartogsProfile,
    ProfileSource,
    builtin,
    completeness_check,
    g_of,
    interior,
    jet,
    kahler_check,
    membership,
    potential,
)


@pytest.fixture
def hyperbolic():
    return builtin("hyperbolic")


@pytest.fixture
def springer():
    return builtin("springer")


class TestBuiltin:
    """Test cases for the builtin registry."""

    def test_hyperbolic(self, hyperbolic):
        """Test the hyperbolic profile metadata."""
        assert hyperbolic.x0 == 1.0
        assert hyperbolic.source is ProfileSource.BUILTIN

    def test_springer_unbounded(self, springer):
        """Test that the Springer profile has x0 = inf."""
        assert math.isinf(springer.x0)

    def test_power(self):
        """Test the power family jet."""
        profile = builtin("power:2.5")
        assert jet(profile, 0.19) == pytest.approx((0.81**2.5, -2.5 * 0.81**1.5, 3.75 * 0.81**0.5), rel=1e-13)

    def test_truncated(self):
        """Test that the truncated hyperbolic profile keeps F = 1 - x."""
        profile = builtin("truncated-hyperbolic:0.25")
        assert profile.x0 == 0.25
        assert jet(profile, 0.2) == pytest.approx((0.8, -1.0, 0.0))

    def test_equal_profiles_compare_equal(self):
        """Test that two lookups of the same name are equal and hash alike."""
        assert builtin("power:2") == builtin("power:2")
        assert hash(builtin("springer")) == hash(builtin("springer"))

    @pytest.mark.parametrize(
        "name", ["nope", "power", "power:abc", "power:-1", "truncated-hyperbolic:1.5", "hyperbolic:2"]
    )
    def test_unknown_or_bad(self, name):
        """Test that unknown names and bad parameters are config errors."""
        with pytest.raises(ConfigError):
            builtin(name)


class TestJet:
    """Test cases for jet."""

    def test_hyperbolic(self, hyperbolic):
        """Test the affine jet."""
        assert jet(hyperbolic, 0.3) == pytest.approx((0.7, -1.0, 0.0))

    def test_springer(self, springer):
        """Test the exponential jet."""
        e = math.exp(-2.0)
        assert jet(springer, 2.0) == pytest.approx((e, -e, e))

    def test_outside(self, hyperbolic):
        """Test that t beyond x0 is a domain error."""
        with pytest.raises(DomainError):
            jet(hyperbolic, 1.2)

    def test_negative(self, springer):
        """Test that negative t is a domain error."""
        with pytest.raises(DomainError):
            jet(springer, -0.1)

    def test_non_positive_value(self):
        """Test that F <= 0 on [0, x0) is a domain error."""
        profile = HartogsProfile.from_expression("0.5 - x", 1.0)
        with pytest.raises(DomainError):
            jet(profile, 0.7)


class TestGOf:
    """Test cases for g_of."""

    def test_examples(self, hyperbolic, springer):
        """Test the worked values."""
        assert g_of(hyperbolic, 0.5) == pytest.approx(4.0)
        assert g_of(hyperbolic, 0.0) == pytest.approx(1.0)
        assert g_of(springer, 37.5) == pytest.approx(1.0)

    def test_closed_forms(self, hyperbolic, springer):
        """Test G against 1/(1-t)^2 and 1 on random t."""
        rng = np.random.default_rng(7)
        for t in rng.uniform(0.0, 0.999, 1000):
            assert g_of(hyperbolic, float(t)) == pytest.approx(1.0 / (1.0 - t) ** 2, rel=1e-12)
        for t in rng.uniform(0.0, 50.0, 1000):
            assert g_of(springer, float(t)) == pytest.approx(1.0, rel=1e-12)

    def test_springer_far_out(self, springer):
        """Test that G stays exact where F itself underflows."""
        assert g_of(springer, 800.0) == pytest.approx(1.0)

    def test_expression_matches_builtin(self, hyperbolic):
        """Test that the expression '1 - x' gives the builtin G."""
        profile = HartogsProfile.from_expression("1 - x", 1.0)
        for t in (0.0, 0.25, 0.5, 0.9):
            assert g_of(profile, t) == pytest.approx(g_of(hyperbolic, t), rel=1e-14)

    def test_outside(self, hyperbolic):
        """Test that t beyond x0 is a domain error."""
        with pytest.raises(DomainError):
            g_of(hyperbolic, 1.0)


class TestFromCallables:
    """Test cases for parametric profiles."""

    def test_with_second_derivative(self):
        """Test a profile given all three functions."""
        profile = HartogsProfile.from_callables("exp", lambda t: np.exp(-t), lambda t: -np.exp(-t), lambda t: np.exp(-t))
        assert profile.source is ProfileSource.PARAMETRIC
        assert g_of(profile, 1.5) == pytest.approx(1.0, rel=1e-12)

    def test_differenced_second_derivative(self):
        """Test that a missing F'' is differenced from F'."""
        profile = HartogsProfile.from_callables("ball", lambda t: 1.0 - t, lambda t: -1.0 + 0.0 * t, x0=1.0)
        assert not profile.has_second_derivative
        assert g_of(profile, 0.5) == pytest.approx(4.0, rel=1e-8)

    def test_differenced_curvature(self):
        """Test the differenced F'' of a curved profile."""
        profile = HartogsProfile.from_callables("exp", lambda t: np.exp(-t), lambda t: -np.exp(-t))
        assert jet(profile, 1.0)[2] == pytest.approx(math.exp(-1.0), rel=1e-8)

    def test_expression_needs_positive_x0(self):
        """Test that x0 <= 0 is rejected."""
        with pytest.raises(InvalidInputError):
            HartogsProfile.from_expression("1 - x", 0.0)


class TestKahlerCheck:
    """Test cases for kahler_check."""

    def test_hyperbolic(self, hyperbolic):
        """Test that the ball passes with min G = 1 at t = 0."""
        result = kahler_check(hyperbolic, 100)
        assert result.passed
        assert result.min_G == pytest.approx(1.0)
        assert result.argmin_t == 0.0
        assert result.decreasing

    def test_springer(self, springer):
        """Test that the Springer profile passes with G = 1."""
        result = kahler_check(springer, 100)
        assert result.passed
        assert result.min_G == pytest.approx(1.0, rel=1e-12)

    def test_increasing_profile_fails(self):
        """Test that F = 1 + x fails."""
        result = kahler_check(HartogsProfile.from_expression("1 + x", 1.0), 100)
        assert not result.passed
        assert result.min_G < 0
        assert not result.decreasing

    def test_grid_size(self, hyperbolic):
        """Test that grid_size < 2 is rejected."""
        with pytest.raises(InvalidInputError):
            kahler_check(hyperbolic, 1)


class TestCompletenessCheck:
    """Test cases for completeness_check."""

    def test_hyperbolic_complete(self, hyperbolic):
        """Test that the ball is complete."""
        assert completeness_check(hyperbolic).verdict == "complete"

    def test_springer_complete(self, springer):
        """Test that the Springer domain is complete."""
        result = completeness_check(springer)
        assert result.verdict == "complete"
        assert result.integral > 1e6

    def test_truncated_incomplete(self):
        """Test that the truncated ball is incomplete with integral atanh(0.5)."""
        result = completeness_check(builtin("truncated-hyperbolic:0.25"))
        assert result.verdict == "incomplete"
        assert result.integral == pytest.approx(math.atanh(0.5), rel=1e-8)

    def test_small_budget_inconclusive(self, springer):
        """Test that running out of cutoffs is inconclusive, not an error."""
        result = completeness_check(springer, budget=4)
        assert result.verdict == "inconclusive"
        assert len(result.trace) == 4

    def test_trace_is_cumulative(self):
        """Test that the trace partial integrals add up the increments."""
        result = completeness_check(builtin("truncated-hyperbolic:0.25"))
        totals = np.cumsum([piece for _, _, piece in result.trace])
        np.testing.assert_allclose(totals, [partial for _, partial, _ in result.trace], rtol=1e-12)

    def test_log_divergence_has_flat_increments(self, hyperbolic):
        """Test that the ball is declared complete on increments whose ratio has reached 1."""
        pieces = [piece for _, _, piece in completeness_check(hyperbolic).trace]
        assert pieces[-1] / pieces[-2] == pytest.approx(1.0, abs=1e-4)

    def test_integrable_singularity_inconclusive(self):
        """Test that a slowly converging power singularity is not mistaken for a divergence."""
        profile = HartogsProfile.from_expression("exp(-100*(1-(1-x)^0.01))", 1.0)
        result = completeness_check(profile)
        assert result.verdict == "inconclusive"
        pieces = [piece for _, _, piece in result.trace]
        assert pieces[-1] / pieces[-2] < 1.0 - 1e-4

    def test_non_kahler(self):
        """Test that a profile failing the Kähler condition is invalid input."""
        with pytest.raises(InvalidInputError):
            completeness_check(HartogsProfile.from_expression("1 + x", 1.0))


class TestMembership:
    """Test cases for membership and interior."""

    def test_origin(self, hyperbolic):
        """Test that the origin is a member."""
        assert membership(hyperbolic, DomainPoint([0, 0]))

    def test_outside_ball(self, hyperbolic):
        """Test that (0.9, 0.9) lies outside the ball."""
        assert not membership(hyperbolic, DomainPoint([0.9, 0.9]))

    def test_springer_far_out(self, springer):
        """Test that (10, 1e-3) lies outside the Springer domain."""
        assert not membership(springer, DomainPoint([10, 1e-3]))

    def test_x_beyond_x0(self, hyperbolic):
        """Test that |z0|^2 >= x0 is not a member."""
        assert not membership(hyperbolic, DomainPoint([1.0, 0.0]))

    def test_monotone_in_s(self, hyperbolic):
        """Test that shrinking s keeps a member inside."""
        for s in np.linspace(0.0, 0.74, 20):
            assert membership(hyperbolic, DomainPoint.from_radial(0.25, float(s), 2))

    def test_boundary_guard(self, hyperbolic):
        """Test that points within the guard are domain errors."""
        f = 0.75
        p = DomainPoint.from_radial(0.25, f * (1 - 1e-12), 2)
        assert membership(hyperbolic, p)
        with pytest.raises(DomainError):
            interior(hyperbolic, p)


class TestDomainPoint:
    """Test cases for DomainPoint."""

    def test_derived(self, hyperbolic):
        """Test x, s and w."""
        p = DomainPoint([0.5, 0.3j, 0.4])
        assert p.n == 3
        assert p.x == pytest.approx(0.25)
        assert p.s == pytest.approx(0.25)
        assert p.w(hyperbolic) == pytest.approx(0.25 / 0.75)

    def test_from_radial(self):
        """Test the radial constructor."""
        p = DomainPoint.from_radial(0.36, 0.16, 3)
        assert p.coords == pytest.approx((0.6, 0.4, 0.0))
        assert p.x == pytest.approx(0.36)
        assert p.s == pytest.approx(0.16)

    def test_empty(self):
        """Test that a point needs a coordinate."""
        with pytest.raises(InvalidInputError):
            DomainPoint([])

    def test_radial_dimension_one(self):
        """Test that s must vanish when n = 1."""
        with pytest.raises(InvalidInputError):
            DomainPoint.from_radial(0.1, 0.1, 1)


class TestPotential:
    """Test cases for potential."""

    def test_examples(self, hyperbolic, springer):
        """Test the worked values."""
        assert potential(hyperbolic, DomainPoint([0, 0])) == 0.0
        assert potential(hyperbolic, DomainPoint([0.5, 0.3])) == pytest.approx(-math.log(0.66))
        assert potential(springer, DomainPoint([1.0, 0.0])) == pytest.approx(1.0)

    def test_outside(self, hyperbolic):
        """Test that non-members are domain errors."""
        with pytest.raises(DomainError):
            potential(hyperbolic, DomainPoint([0.9, 0.9]))

    def test_blows_up_at_boundary(self, hyperbolic, springer):
        """Test that the potential strictly increases as s approaches F(x)."""
        for profile, x in ((hyperbolic, 0.3), (springer, 2.0)):
            f = jet(profile, x)[0]
            values = [potential(profile, DomainPoint.from_radial(x, f * (1 - 2.0**-k), 2)) for k in range(1, 30)]
            assert all(b > a for a, b in zip(values, values[1:]))

    def test_guard_at_two_to_minus_thirty(self, hyperbolic):
        """Test that s = F(x)(1 - 2^-30) lies inside the boundary guard, which ends the blow-up sampling at k = 29."""
        f = jet(hyperbolic, 0.3)[0]
        with pytest.raises(DomainError):
            potential(hyperbolic, DomainPoint.from_radial(0.3, f * (1 - 2.0**-30), 2))
