"""Tests for the ε-function, verdicts and quantization scans."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy.special import comb, factorial

import balanced_lab.epsilon as epsilon_module
from balanced_lab.epsilon import (
    BALANCED,
    INCONCLUSIVE,
    NOT_BALANCED,
    TRIVIAL_SPACE,
    affine_fit,
    balanced_verdict,
    epsilon_at,
    gauge_twisted_epsilon,
    hyperbolic_constant,
    regular_quantization_scan,
)
from balanced_lab.errors import InvalidInputError, NumericalFailure, TrivialSpaceError
from balanced_lab.profile import DomainPoint, HartogsProfile, builtin
from balanced_lab.sampling import random_member_points

PI2 = math.pi**2


@pytest.fixture
def hyperbolic():
    return builtin("hyperbolic")


@pytest.fixture
def springer():
    return builtin("springer")


def twisted_plane_epsilon(z, m, c, degree=40):
    """ε for the plane weight e^{-m|z|^2 + m Re(c z)} from the Gram matrix of 1, z, ..., z^degree.

    Completing the square moves the weight to a Gaussian centred at conj(c) / 2,
    where the Gram entries are finite binomial sums.
    """
    a = np.conj(c) / 2.0
    size = degree + 1
    gram = np.zeros((size, size), dtype=complex)
    for r in range(size):
        for k in range(size):
            i = np.arange(min(r, k) + 1)
            moments = factorial(i) * math.pi / m ** (i + 1.0)
            gram[r, k] = np.sum(comb(r, i) * comb(k, i) * a ** (r - i) * np.conj(a) ** (k - i) * moments)
    gram *= math.exp(m * abs(c) ** 2 / 4.0)
    scale = 1.0 / np.sqrt(gram.diagonal().real)
    v = z ** np.arange(size)
    y = np.linalg.solve(gram * scale[:, None] * scale[None, :], v * scale)
    kernel = np.vdot(y * scale, v).real
    return math.exp(-m * (abs(z) ** 2 - (c * z).real)) * kernel


class TestHyperbolicConstant:
    """Test cases for hyperbolic_constant."""

    def test_example(self):
        """Test (m, n) = (4, 2)."""
        assert hyperbolic_constant(4, 2) == pytest.approx(6 / PI2, rel=1e-14)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_telescoping(self, n):
        """Test that m = n + 1 gives n! / pi^n."""
        assert hyperbolic_constant(n + 1, n) == pytest.approx(math.factorial(n) / math.pi**n, rel=1e-13)

    def test_trivial(self):
        """Test that m = n is refused."""
        with pytest.raises(TrivialSpaceError):
            hyperbolic_constant(3, 3)


class TestEpsilonAt:
    """Test cases for epsilon_at."""

    def test_hyperbolic_constant(self, hyperbolic):
        """Test that ε is 6/pi^2 everywhere on the ball at m = 4."""
        for p in (DomainPoint([0, 0]), DomainPoint([0.5, 0.3]), DomainPoint([0.1j, 0.7])):
            sample = epsilon_at(hyperbolic, p, 4)
            assert sample.epsilon == pytest.approx(6 / PI2, rel=1e-10)
            assert sample.method == "closed-form"

    def test_hyperbolic_series(self, hyperbolic):
        """Test the series route on the ball."""
        sample = epsilon_at(hyperbolic, DomainPoint([0.5, 0.3]), 4, method="series")
        assert sample.epsilon == pytest.approx(6 / PI2, rel=1e-8)
        assert sample.error_budget >= 0

    def test_springer_origin(self, springer):
        """Test ε = 8/pi^2 at the Springer origin."""
        assert epsilon_at(springer, DomainPoint([0, 0]), 4, gamma=1.0).epsilon == pytest.approx(8 / PI2, rel=1e-12)

    def test_springer_half(self, springer):
        """Test ε = 7/pi^2 at w = 0.5."""
        p = DomainPoint.from_radial(0.4, 0.5 * math.exp(-0.4), 2)
        sample = epsilon_at(springer, p, 4, gamma=1.0)
        assert sample.w == pytest.approx(0.5)
        assert sample.epsilon == pytest.approx(7 / PI2, rel=1e-12)

    def test_springer_estimated_gamma(self, springer):
        """Test the closed form with the estimated gamma."""
        sample = epsilon_at(springer, DomainPoint([0, 0]), 4)
        assert sample.epsilon == pytest.approx(8 / PI2, rel=1e-5)
        assert sample.error_budget >= 0

    def test_springer_series(self, springer):
        """Test the series route at the Springer origin."""
        assert epsilon_at(springer, DomainPoint([0, 0]), 4, method="series").epsilon == pytest.approx(8 / PI2, rel=1e-9)

    def test_trivial(self, hyperbolic):
        """Test that m <= n is refused."""
        with pytest.raises(TrivialSpaceError):
            epsilon_at(hyperbolic, DomainPoint([0, 0]), 2)

    def test_poor_gamma_uses_series(self):
        """Test that a profile failing the closed-form identity is sampled by the series."""
        truncated = builtin("truncated-hyperbolic:0.25")
        p = DomainPoint.from_radial(0.05, 0.3 * 0.95, 2)
        sample = epsilon_at(truncated, p, 4)
        assert sample.method == "series"
        assert sample.epsilon == pytest.approx(epsilon_at(truncated, p, 4, method="series").epsilon, rel=1e-12)

    def test_unknown_method(self, hyperbolic):
        """Test that an unknown method is rejected."""
        with pytest.raises(InvalidInputError):
            epsilon_at(hyperbolic, DomainPoint([0, 0]), 4, method="magic")


class TestGaugeInvariance:
    """Test cases for gauge_twisted_epsilon."""

    @pytest.mark.parametrize("n", [1, 2])
    def test_closed_form(self, springer, n):
        """Test that twisting the potential by Re(c z0) leaves ε unchanged."""
        rng = np.random.default_rng(99 + n)
        points = random_member_points(springer, n, 200, seed=5 + n)
        for p in points:
            c = complex(*rng.uniform(-0.5, 0.5, 2))
            plain = epsilon_at(springer, p, n + 2, gamma=1.0).epsilon
            twisted = gauge_twisted_epsilon(springer, p, n + 2, c, gamma=1.0)
            assert abs(twisted - plain) <= 1e-10 * plain

    def test_series(self, hyperbolic):
        """Test gauge invariance on the series route."""
        p = DomainPoint([0.3 + 0.2j, 0.4])
        plain = epsilon_at(hyperbolic, p, 4, method="series").epsilon
        twisted = gauge_twisted_epsilon(hyperbolic, p, 4, 0.3 - 0.1j, method="series")
        assert abs(twisted - plain) <= 1e-10 * plain

    @pytest.mark.parametrize("method", ["closed-form", "series"])
    def test_matches_gram_matrix(self, springer, method):
        """Test the twisted ε against a kernel built from the non-diagonal Gram matrix of the twisted weight."""
        rng = np.random.default_rng(7)
        for _ in range(20):
            z = complex(*rng.uniform(-0.5, 0.5, 2))
            c = complex(*rng.uniform(-0.5, 0.5, 2))
            expected = twisted_plane_epsilon(z, 3, c)
            assert expected == pytest.approx(3 / math.pi, rel=1e-9)
            twisted = gauge_twisted_epsilon(springer, DomainPoint([z]), 3, c, method=method, gamma=1.0)
            assert twisted == pytest.approx(expected, rel=1e-9)


class TestBalancedVerdict:
    """Test cases for balanced_verdict."""

    def test_hyperbolic(self, hyperbolic):
        """Test that the ball is balanced at m = 4."""
        verdict = balanced_verdict(hyperbolic, 4, 2, sample_count=32, tol=1e-6)
        assert verdict.verdict == BALANCED
        assert verdict.relative_spread <= 1e-6
        assert verdict.constant_estimate == pytest.approx(6 / PI2, rel=1e-9)
        assert len(verdict.samples) == 32

    def test_hyperbolic_series(self, hyperbolic):
        """Test the series route on the ball."""
        verdict = balanced_verdict(hyperbolic, 4, 2, sample_count=8, method="series")
        assert verdict.verdict == BALANCED
        assert verdict.gamma is None

    def test_springer(self, springer):
        """Test that the Springer domain is not balanced and the spread follows the sampled w."""
        verdict = balanced_verdict(springer, 4, 2, sample_count=32, tol=1e-6)
        assert verdict.verdict == NOT_BALANCED
        ws = np.array([s.w for s in verdict.samples])
        assert verdict.relative_spread == pytest.approx((ws.max() - ws.min()) / np.mean(4.0 - ws), rel=1e-4)

    @pytest.mark.parametrize("name", ["hyperbolic", "springer", "power:2.5"])
    def test_trivial_space(self, name):
        """Test that m <= n is not balanced with reason trivial-space."""
        verdict = balanced_verdict(builtin(name), 2, 2)
        assert verdict.verdict == NOT_BALANCED
        assert verdict.reason == TRIVIAL_SPACE
        assert verdict.samples == ()

    def test_non_kahler(self):
        """Test that a non-Kähler profile is rejected."""
        with pytest.raises(InvalidInputError):
            balanced_verdict(HartogsProfile.from_expression("1 + x", 1.0), 4, 2)

    def test_poor_gamma_inconclusive(self):
        """Test that the closed form is not used when gamma leaves a large residual."""
        verdict = balanced_verdict(builtin("truncated-hyperbolic:0.25"), 4, 2, sample_count=8)
        assert verdict.verdict == INCONCLUSIVE
        assert "gamma residual" in verdict.reason
        assert verdict.samples == ()
        assert math.isnan(verdict.relative_spread)

    def test_bad_tol(self, hyperbolic):
        """Test that a non-positive tolerance is rejected."""
        with pytest.raises(InvalidInputError):
            balanced_verdict(hyperbolic, 4, 2, tol=0.0)

    def test_failed_sample_inconclusive(self, hyperbolic, monkeypatch):
        """Test that one failed sample makes the verdict inconclusive."""
        real = epsilon_module.epsilon_at
        calls = []

        def flaky(profile, p, m, **kwargs):
            calls.append(p)
            if len(calls) == 3:
                raise NumericalFailure("injected")
            return real(profile, p, m, **kwargs)

        monkeypatch.setattr(epsilon_module, "epsilon_at", flaky)
        verdict = balanced_verdict(hyperbolic, 4, 2, sample_count=8)
        assert verdict.verdict == INCONCLUSIVE
        assert math.isnan(verdict.relative_spread)
        assert len(verdict.samples) == 7
        assert "1 of 8" in verdict.reason

    def test_seed_and_pool_determinism(self, springer):
        """Test that the same seed gives the same samples with and without a pool."""
        inline = balanced_verdict(springer, 4, 2, sample_count=16, seed=3)
        with ThreadPoolExecutor(max_workers=4) as pool:
            pooled = balanced_verdict(springer, 4, 2, sample_count=16, seed=3, pool=pool)
        assert [s.epsilon for s in inline.samples] == [s.epsilon for s in pooled.samples]
        assert inline.relative_spread == pooled.relative_spread

    def test_seed_changes_points(self, springer):
        """Test that a different seed draws different points."""
        a = balanced_verdict(springer, 4, 2, sample_count=4, seed=1)
        b = balanced_verdict(springer, 4, 2, sample_count=4, seed=2)
        assert [s.point for s in a.samples] != [s.point for s in b.samples]


class TestRegularQuantizationScan:
    """Test cases for regular_quantization_scan."""

    def test_hyperbolic(self, hyperbolic):
        """Test that the ball is balanced for m = n+1 .. n+5."""
        scan = regular_quantization_scan(hyperbolic, 3, 7, 2, sample_count=8)
        assert scan.all_balanced
        assert [v.m for v in scan.verdicts] == [3, 4, 5, 6, 7]
        for v in scan.verdicts:
            assert v.constant_estimate == pytest.approx(hyperbolic_constant(v.m, 2), rel=1e-9)

    def test_springer(self, springer):
        """Test that the Springer domain is balanced for no m."""
        scan = regular_quantization_scan(springer, 3, 6, 2, sample_count=8)
        assert not scan.all_balanced
        assert all(v.verdict == NOT_BALANCED for v in scan.verdicts)

    def test_empty_range(self, hyperbolic):
        """Test that m_from > m_to gives an empty scan."""
        scan = regular_quantization_scan(hyperbolic, 5, 4, 2)
        assert scan.verdicts == ()
        assert not scan.all_balanced

    def test_includes_trivial_weights(self, hyperbolic):
        """Test that weights m <= n are recorded as not balanced."""
        scan = regular_quantization_scan(hyperbolic, 2, 3, 2, sample_count=4)
        assert [v.verdict for v in scan.verdicts] == [NOT_BALANCED, BALANCED]
        assert not scan.all_balanced

    def test_failure_recorded(self):
        """Test that a failing weight becomes an inconclusive entry."""
        scan = regular_quantization_scan(HartogsProfile.from_expression("1 + x", 1.0), 3, 4, 2)
        assert [v.verdict for v in scan.verdicts] == [INCONCLUSIVE, INCONCLUSIVE]


class TestAffineFit:
    """Test cases for affine_fit."""

    def test_springer(self, springer):
        """Test slope gamma = 1 and intercept m - 1."""
        samples = balanced_verdict(springer, 4, 2, sample_count=32).samples
        fit = affine_fit(samples, 2)
        assert fit.slope == pytest.approx(1.0, abs=1e-4)
        assert fit.intercept == pytest.approx(3.0, abs=1e-4)
        assert fit.residual <= 1e-6

    def test_hyperbolic(self, hyperbolic):
        """Test slope 0 on the ball."""
        samples = balanced_verdict(hyperbolic, 5, 3, sample_count=16).samples
        fit = affine_fit(samples, 3)
        assert fit.slope == pytest.approx(0.0, abs=1e-6)
        assert fit.intercept == pytest.approx(4.0, rel=1e-8)

    def test_needs_two_samples(self, springer):
        """Test that a single sample cannot be fitted."""
        samples = balanced_verdict(springer, 4, 2, sample_count=1).samples
        with pytest.raises(InvalidInputError):
            affine_fit(samples, 2)

    def test_mixed_weights(self, springer):
        """Test that samples of different m are rejected."""
        a = balanced_verdict(springer, 4, 2, sample_count=2).samples
        b = balanced_verdict(springer, 5, 2, sample_count=2).samples
        with pytest.raises(InvalidInputError):
            affine_fit(a + b, 2)
