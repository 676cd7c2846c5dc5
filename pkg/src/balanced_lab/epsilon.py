"""The ε-function, balanced verdicts and regular-quantization scans.

ε_{mg}(z) = e^{-mΦ(z)} K_{mΦ}(z, z) = D^m K with D = F(x) - s. On the
domains handled here it depends on z only through w = s / F(x), and the
closed form is affine in 1 - w with slope proportional to γ; a metric is
balanced exactly when that slope vanishes.
"""

from __future__ import annotations

import functools
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .errors import BalancedLabError, InvalidInputError, NumericalFailure
from .kernel import (
    DEFAULT_DEGREE_CAP,
    DEFAULT_SERIES_TOL,
    LOG_PI,
    GammaEstimate,
    estimate_gamma,
    kernel_series,
    log_kernel_closed,
    log_leading_product,
    require_nontrivial,
)
from .profile import DomainPoint, HartogsProfile, interior, kahler_check
from .quadrature import DEFAULT_TOL
from .sampling import box_for, halton_points
from .session import ordered_map

logger = logging.getLogger(__name__)

SERIES = "series"
CLOSED_FORM = "closed-form"
METHODS = (SERIES, CLOSED_FORM)

DEFAULT_TOLERANCE = {CLOSED_FORM: 1e-6, SERIES: 1e-4}
GAMMA_RESIDUAL_LIMIT = DEFAULT_TOLERANCE[CLOSED_FORM]
DEFAULT_SAMPLES = 64

BALANCED = "balanced"
NOT_BALANCED = "not_balanced"
INCONCLUSIVE = "inconclusive"
TRIVIAL_SPACE = "trivial-space"


@dataclass(frozen=True)
class EpsilonSample:
    point: DomainPoint
    m: int
    epsilon: float
    method: str
    error_budget: float
    w: float


@dataclass(frozen=True)
class BalancedVerdict:
    """Outcome of sampling ε at one weight m.

    ``reason`` is set when the verdict was not decided by the spread, e.g.
    ``"trivial-space"`` for m <= n or a sampling failure.
    """

    m: int
    verdict: str
    relative_spread: float
    constant_estimate: float
    reason: Optional[str] = None
    samples: Tuple[EpsilonSample, ...] = ()
    method: str = CLOSED_FORM
    gamma: Optional[float] = None


@dataclass(frozen=True)
class QuantizationScan:
    verdicts: Tuple[BalancedVerdict, ...]
    all_balanced: bool


@dataclass(frozen=True)
class AffineFit:
    slope: float
    intercept: float
    residual: float


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}, expected one of {METHODS}")


@functools.lru_cache(maxsize=64)
def profile_gamma(profile: HartogsProfile) -> GammaEstimate:
    """γ from the default probe set, memoised per profile."""
    return estimate_gamma(profile)


def hyperbolic_constant(m: int, n: int) -> float:
    """(m-1)(m-2)...(m-n) / pi^n."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    require_nontrivial(m, n)
    return math.exp(float(gammaln(m) - gammaln(m - n)) - n * LOG_PI)


def epsilon_at(
    profile: HartogsProfile,
    p: DomainPoint,
    m: int,
    method: str = CLOSED_FORM,
    gamma: Optional[float] = None,
    tol: float = DEFAULT_SERIES_TOL,
    degree_cap: int = DEFAULT_DEGREE_CAP,
    quad_tol: float = DEFAULT_TOL,
) -> EpsilonSample:
    """ε_{mg} at p by the kernel series or the closed form.

    The closed form takes ``gamma`` when given and the memoised estimate
    otherwise; the estimate's residual then enters the error budget. An
    estimate whose residual exceeds GAMMA_RESIDUAL_LIMIT means F does not
    satisfy the identity the closed form rests on, so the series is used.
    """
    _check_method(method)
    _, s, f, d = interior(profile, p)
    require_nontrivial(m, p.n)
    w = s / f
    log_d = math.log(d)
    if method == SERIES:
        evaluation = kernel_series(profile, p, m, tol=tol, degree_cap=degree_cap, quad_tol=quad_tol)
        scale = math.exp(m * log_d)
        epsilon = scale * evaluation.value
        budget = scale * evaluation.error_budget
    else:
        residual = 0.0
        if gamma is None:
            estimate = profile_gamma(profile)
            if estimate.residual > GAMMA_RESIDUAL_LIMIT:
                logger.warning(
                    "gamma residual %.3g for %s exceeds %g; using the kernel series",
                    estimate.residual,
                    profile.name,
                    GAMMA_RESIDUAL_LIMIT,
                )
                return epsilon_at(profile, p, m, SERIES, tol=tol, degree_cap=degree_cap, quad_tol=quad_tol)
            gamma, residual = estimate.gamma_hat, estimate.residual
        epsilon = math.exp(m * log_d + log_kernel_closed(profile, p, m, gamma))
        budget = epsilon * residual
    return EpsilonSample(p, m, epsilon, method, budget, w)


def gauge_twisted_epsilon(
    profile: HartogsProfile,
    p: DomainPoint,
    m: int,
    c: complex,
    method: str = CLOSED_FORM,
    gamma: Optional[float] = None,
) -> float:
    """ε for the potential Φ - Re(c z0).

    The weight gains e^{m Re(c z0)}; f -> f e^{-m c z0 / 2} is an isometry
    onto the twisted space, so the twisted kernel is |e^{-m c z0 / 2}|^2 K.
    """
    _check_method(method)
    _, _, _, d = interior(profile, p)
    require_nontrivial(m, p.n)
    z0 = p.coords[0]
    shift = (c * z0).real
    twisted_potential = -math.log(d) - shift
    if method == CLOSED_FORM and gamma is None:
        estimate = profile_gamma(profile)
        if estimate.residual > GAMMA_RESIDUAL_LIMIT:
            method = SERIES
        gamma = estimate.gamma_hat
    if method == SERIES:
        log_k = math.log(kernel_series(profile, p, m).value)
    else:
        log_k = log_kernel_closed(profile, p, m, gamma)
    log_twisted_kernel = 2.0 * (-m * c * z0 / 2.0).real + log_k
    return math.exp(-m * twisted_potential + log_twisted_kernel)


def _sample_or_none(
    profile: HartogsProfile, p: DomainPoint, m: int, method: str, gamma: Optional[float]
) -> Optional[EpsilonSample]:
    try:
        return epsilon_at(profile, p, m, method=method, gamma=gamma)
    except BalancedLabError as exc:
        logger.warning("epsilon sample at %s failed for %s: %s", p.coords, profile.name, exc)
        return None


def balanced_verdict(
    profile: HartogsProfile,
    m: int,
    n: int,
    sample_count: int = DEFAULT_SAMPLES,
    tol: Optional[float] = None,
    seed: int = 0,
    method: str = CLOSED_FORM,
    pool: Optional[Executor] = None,
) -> BalancedVerdict:
    """Sample ε over the domain and compare its relative spread with ``tol``.

    The verdict is numerical: a finite sample can refute constancy but only
    supports it.
    """
    _check_method(method)
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    if m <= n:
        logger.info("%s at m=%d, n=%d: not balanced (trivial space)", profile.name, m, n)
        return BalancedVerdict(m, NOT_BALANCED, 0.0, 0.0, TRIVIAL_SPACE, (), method, None)
    if not kahler_check(profile).passed:
        raise InvalidInputError(f"profile {profile.name} fails the Kähler condition")
    tol = DEFAULT_TOLERANCE[method] if tol is None else tol
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")

    gamma = None
    if method == CLOSED_FORM:
        estimate = profile_gamma(profile)
        if estimate.residual > tol:
            reason = f"gamma residual {estimate.residual:.3g} exceeds tol {tol:g}; the closed form does not apply"
            logger.warning("%s at m=%d: inconclusive, %s", profile.name, m, reason)
            return BalancedVerdict(m, INCONCLUSIVE, math.nan, math.nan, reason, (), method, estimate.gamma_hat)
        gamma = estimate.gamma_hat
    points = halton_points(profile, box_for(profile, method), n, sample_count, seed)
    results = ordered_map(lambda p: _sample_or_none(profile, p, m, method, gamma), points, pool)
    samples = tuple(r for r in results if r is not None)
    failed = len(results) - len(samples)
    if failed:
        reason = f"{failed} of {len(results)} samples failed"
        logger.warning("%s at m=%d: inconclusive, %s", profile.name, m, reason)
        mean = float(np.mean([s.epsilon for s in samples])) if samples else math.nan
        return BalancedVerdict(m, INCONCLUSIVE, math.nan, mean, reason, samples, method, gamma)

    eps = np.array([s.epsilon for s in samples])
    mean = float(eps.mean())
    spread = float((eps.max() - eps.min()) / mean)
    verdict = BALANCED if spread <= tol else NOT_BALANCED
    logger.info("%s at m=%d, n=%d: %s (spread %.3g, constant %.10g)", profile.name, m, n, verdict, spread, mean)
    return BalancedVerdict(m, verdict, spread, mean, None, samples, method, gamma)


def regular_quantization_scan(
    profile: HartogsProfile,
    m_from: int,
    m_to: int,
    n: int,
    sample_count: int = DEFAULT_SAMPLES,
    tol: Optional[float] = None,
    seed: int = 0,
    method: str = CLOSED_FORM,
    pool: Optional[Executor] = None,
) -> QuantizationScan:
    """One verdict per m in [m_from, m_to]; a failing m is recorded as inconclusive."""
    verdicts = []
    for m in range(m_from, m_to + 1):
        try:
            verdict = balanced_verdict(profile, m, n, sample_count, tol, seed, method, pool)
        except (InvalidInputError, NumericalFailure) as exc:
            logger.warning("quantization scan of %s: m=%d failed: %s", profile.name, m, exc)
            verdict = BalancedVerdict(m, INCONCLUSIVE, math.nan, math.nan, str(exc), (), method, None)
        verdicts.append(verdict)
    all_balanced = bool(verdicts) and all(v.verdict == BALANCED for v in verdicts)
    return QuantizationScan(tuple(verdicts), all_balanced)


def affine_fit(samples: Sequence[EpsilonSample], n: int) -> AffineFit:
    """Fit ε pi^n / ((m-2)...(m-n)) = intercept + slope (1 - w).

    The intercept estimates m - 1 and the slope γ.
    """
    if len(samples) < 2:
        raise InvalidInputError("affine fit needs at least two samples")
    ms = {s.m for s in samples}
    if len(ms) != 1:
        raise InvalidInputError(f"samples mix weights {sorted(ms)}")
    m = ms.pop()
    require_nontrivial(m, n)
    scale = math.exp(n * LOG_PI - log_leading_product(m, n))
    xs = np.array([1.0 - s.w for s in samples])
    ys = np.array([s.epsilon for s in samples]) * scale
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = float(np.max(np.abs(ys - (slope * xs + intercept))))
    return AffineFit(float(slope), float(intercept), residual)
