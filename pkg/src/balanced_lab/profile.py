"""Hartogs-domain profiles and the pointwise predicates derived from them.

A profile is a positive decreasing function F on [0, x0). The Hartogs domain
is ``{|z0|^2 < x0, ||z||^2 < F(|z0|^2)}`` with Kähler potential
``-log(F(|z0|^2) - ||z||^2)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import expr as expr_lang
from .errors import ConfigError, DomainError, InvalidInputError, QuadratureFailure

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]
JetFn = Callable[[Number], Tuple[Number, Number, Number]]

BOUNDARY_DELTA = 1e-9
"""Points must keep F(x) - s >= BOUNDARY_DELTA * F(x)."""

TINY = 1e-300

# Completeness probe constants.
DIVERGENCE_THRESHOLD = 1e6
DIVERGENCE_RATIO = 0.5
TAIL_TOLERANCE = 1e-10
LOG_DIVERGENCE_RATIO = 0.99
LOG_DIVERGENCE_WINDOW = 8
LOG_DIVERGENCE_FLATNESS = 1e-4
MAX_DYADIC_DEPTH = 40
PROBE_MAX_PANELS = 4096


class ProfileSource(str, Enum):
    BUILTIN = "builtin"
    EXPRESSION = "expression"
    PARAMETRIC = "parametric"


@dataclass(frozen=True)
class HartogsProfile:
    """The profile F of a Hartogs domain.

    ``evaluator`` maps t (float or array) to (F, F', F''). The optional
    ``log_evaluator`` maps t to (log F, F'/F, F''/F) and stays finite where F
    itself underflows. Profiles compare and hash by ``name`` and ``x0`` so
    moment caches can be shared between equal profiles built twice.
    """

    name: str
    x0: float
    source: ProfileSource
    evaluator: JetFn = field(compare=False, repr=False)
    log_evaluator: Optional[JetFn] = field(default=None, compare=False, repr=False)
    has_second_derivative: bool = field(default=True, compare=False)

    @classmethod
    def from_expression(cls, text: str, x0: float) -> "HartogsProfile":
        parsed = expr_lang.parse(text)
        if not x0 > 0:
            raise InvalidInputError(f"x0 must be positive, got {x0}")
        return cls(
            name=f"expr:{text}",
            x0=float(x0),
            source=ProfileSource.EXPRESSION,
            evaluator=lambda t: expr_lang.eval_jet2(parsed, t),
        )

    @classmethod
    def from_callables(
        cls,
        name: str,
        f: Callable[[Number], Number],
        df: Callable[[Number], Number],
        d2f: Optional[Callable[[Number], Number]] = None,
        x0: float = math.inf,
    ) -> "HartogsProfile":
        """Profile from plain functions; F'' is differenced from F' when absent."""
        if d2f is None:

            def evaluator(t: Number) -> Tuple[Number, Number, Number]:
                t = np.asarray(t, dtype=float)
                h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, t)
                lo = np.maximum(t - h, 0.0)
                second = (df(t + h) - df(lo)) / (t + h - lo)
                return f(t), df(t), second

            return cls(name, float(x0), ProfileSource.PARAMETRIC, evaluator, has_second_derivative=False)
        return cls(name, float(x0), ProfileSource.PARAMETRIC, lambda t: (f(t), df(t), d2f(t)))

    def raw_jet(self, t: Number) -> Tuple[Number, Number, Number]:
        """Unchecked 2-jet, vectorised over ``t``."""
        return self.evaluator(t)

    def log_jet(self, t: Number) -> Tuple[Number, Number, Number]:
        """Unchecked (log F, F'/F, F''/F), vectorised over ``t``."""
        if self.log_evaluator is not None:
            return self.log_evaluator(t)
        f, df, d2f = self.evaluator(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(f), df / f, d2f / f


@dataclass(frozen=True)
class DomainPoint:
    """Complex coordinates (z0, ..., z_{n-1})."""

    coords: Tuple[complex, ...]

    def __init__(self, coords: Sequence[complex]):
        if len(coords) < 1:
            raise InvalidInputError("a domain point needs at least one coordinate")
        object.__setattr__(self, "coords", tuple(complex(c) for c in coords))

    @classmethod
    def from_radial(cls, x: float, s: float, n: int) -> "DomainPoint":
        """The point (sqrt(x), sqrt(s), 0, ...) in dimension n."""
        coords = [complex(math.sqrt(x))] + [0j] * (n - 1)
        if n > 1:
            coords[1] = complex(math.sqrt(s))
        elif s != 0:
            raise InvalidInputError("s must be 0 in dimension 1")
        return cls(coords)

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def x(self) -> float:
        return abs(self.coords[0]) ** 2

    @property
    def s(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.coords[1:]))

    def w(self, profile: HartogsProfile) -> float:
        return self.s / jet(profile, self.x)[0]

    def as_array(self) -> np.ndarray:
        return np.array(self.coords, dtype=complex)


@dataclass(frozen=True)
class KahlerCheck:
    min_G: float
    argmin_t: float
    decreasing: bool
    passed: bool
    grid_size: int


@dataclass(frozen=True)
class CompletenessCheck:
    verdict: str  # complete | incomplete | inconclusive
    integral: float
    trace: Tuple[Tuple[float, float, float], ...]  # (cutoff, partial integral, increment)


# ---------------------------------------------------------------------------
# Builtin registry
# ---------------------------------------------------------------------------


def _hyperbolic_jet(t: Number) -> Tuple[Number, Number, Number]:
    t = np.asarray(t, dtype=float)
    return 1.0 - t, -np.ones_like(t), np.zeros_like(t)


def _hyperbolic_log_jet(t: Number) -> Tuple[Number, Number, Number]:
    u = 1.0 - np.asarray(t, dtype=float)
    return np.log(u), -1.0 / u, np.zeros_like(u)


def _springer_jet(t: Number) -> Tuple[Number, Number, Number]:
    e = np.exp(-np.asarray(t, dtype=float))
    return e, -e, e


def _springer_log_jet(t: Number) -> Tuple[Number, Number, Number]:
    t = np.asarray(t, dtype=float)
    return -t, -np.ones_like(t), np.ones_like(t)


def _power_jet(nu: float) -> JetFn:
    def evaluator(t: Number) -> Tuple[Number, Number, Number]:
        u = 1.0 - np.asarray(t, dtype=float)
        return u**nu, -nu * u ** (nu - 1.0), nu * (nu - 1.0) * u ** (nu - 2.0)

    return evaluator


def _power_log_jet(nu: float) -> JetFn:
    def evaluator(t: Number) -> Tuple[Number, Number, Number]:
        u = 1.0 - np.asarray(t, dtype=float)
        return nu * np.log(u), -nu / u, nu * (nu - 1.0) / (u * u)

    return evaluator


def _parse_parameter(name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad parameter {text!r} for builtin profile {name!r}") from exc


BUILTIN_NAMES = ("hyperbolic", "springer", "power:<nu>", "truncated-hyperbolic:<x0>")


def builtin(name: str) -> HartogsProfile:
    """Look up a builtin profile by registry name."""
    family, _, param = name.partition(":")
    if family == "hyperbolic" and not param:
        return HartogsProfile("hyperbolic", 1.0, ProfileSource.BUILTIN, _hyperbolic_jet, _hyperbolic_log_jet)
    if family == "springer" and not param:
        return HartogsProfile("springer", math.inf, ProfileSource.BUILTIN, _springer_jet, _springer_log_jet)
    if family == "power" and param:
        nu = _parse_parameter(name, param)
        if not nu > 0:
            raise ConfigError(f"power profile needs nu > 0, got {nu}")
        return HartogsProfile(f"power:{nu!r}", 1.0, ProfileSource.BUILTIN, _power_jet(nu), _power_log_jet(nu))
    if family == "truncated-hyperbolic" and param:
        x0 = _parse_parameter(name, param)
        if not 0 < x0 < 1:
            raise ConfigError(f"truncated-hyperbolic needs 0 < x0 < 1, got {x0}")
        return HartogsProfile(
            f"truncated-hyperbolic:{x0!r}", x0, ProfileSource.BUILTIN, _hyperbolic_jet, _hyperbolic_log_jet
        )
    raise ConfigError(f"unknown builtin profile {name!r}; known: {', '.join(BUILTIN_NAMES)}")


# ---------------------------------------------------------------------------
# Pointwise quantities
# ---------------------------------------------------------------------------


def jet(profile: HartogsProfile, t: float) -> Tuple[float, float, float]:
    """(F(t), F'(t), F''(t)) for 0 <= t < x0."""
    if not 0.0 <= t < profile.x0:
        raise DomainError(f"t={t} outside [0, {profile.x0}) for profile {profile.name}")
    f, df, d2f = (float(v) for v in profile.raw_jet(t))
    if not f > 0:
        raise DomainError(f"F({t}) = {f} is not positive for profile {profile.name}")
    return f, df, d2f


def g_from_ratios(t: Number, r1: Number, r2: Number) -> Number:
    """G = -(tF'/F)' from r1 = F'/F and r2 = F''/F."""
    return -r1 - t * r2 + t * r1 * r1


def g_of(profile: HartogsProfile, t: float) -> float:
    """The Kähler positivity witness G(t) = -(tF'/F)'."""
    if not 0.0 <= t < profile.x0:
        raise DomainError(f"t={t} outside [0, {profile.x0}) for profile {profile.name}")
    log_f, r1, r2 = (float(v) for v in profile.log_jet(t))
    g = float(g_from_ratios(t, r1, r2))
    if not math.isfinite(log_f) or not math.isfinite(g):
        raise DomainError(f"G({t}) is not finite for profile {profile.name}")
    return g


def from_unit(u: Number, x0: float) -> Number:
    """Map u in [0, 1) onto [0, x0); infinite x0 uses t = u / (1 - u)."""
    if math.isinf(x0):
        return u / (1.0 - u)
    return u * x0


def sample_grid(profile: HartogsProfile, grid_size: int) -> np.ndarray:
    """Grid over [0, x0), dropping points where F underflows."""
    if grid_size < 2:
        raise InvalidInputError(f"grid_size must be >= 2, got {grid_size}")
    ts = from_unit(np.arange(grid_size) / grid_size, profile.x0)
    log_f = np.asarray(profile.log_jet(ts)[0], dtype=float)
    return ts[log_f > math.log(TINY)]


def kahler_check(profile: HartogsProfile, grid_size: int = 100) -> KahlerCheck:
    """Sample G over [0, x0); the metric is Kähler iff min G > 0."""
    ts = sample_grid(profile, grid_size)
    with np.errstate(all="ignore"):
        _, r1, r2 = (np.asarray(v, dtype=float) for v in profile.log_jet(ts))
        gs = np.asarray(g_from_ratios(ts, r1, r2), dtype=float)
    i = int(np.nanargmin(gs))
    result = KahlerCheck(
        min_G=float(gs[i]),
        argmin_t=float(ts[i]),
        decreasing=bool(np.all(r1 <= 0)),
        passed=bool(gs[i] > 0),
        grid_size=grid_size,
    )
    logger.info("kahler check for %s: min G=%.6g at t=%.6g pass=%s", profile.name, result.min_G, result.argmin_t, result.passed)
    return result


def completeness_check(profile: HartogsProfile, budget: int = 64, tol: float = 1e-10) -> CompletenessCheck:
    """Probe the divergence of the integral of sqrt(G(u^2)) over [0, sqrt(x0)).

    Cutoffs approach the endpoint dyadically; the verdict is decided from the
    partial integrals and the ratio of successive increments. At the
    resolution limit of a finite endpoint, equal dyadic increments mark a
    logarithmic divergence: the window ratios must stay >= 0.99 and the last
    one must be within LOG_DIVERGENCE_FLATNESS of 1. An integrable power
    singularity (1 - u)^-a, a < 1, keeps its ratios at 2^(a-1) and stays
    inconclusive.
    """
    from .quadrature import integrate

    if not kahler_check(profile).passed:
        raise InvalidInputError(f"profile {profile.name} fails the Kähler condition; the completeness integral is undefined")

    def integrand(u: float) -> float:
        g = g_of(profile, u * u)
        if g < 0:
            raise InvalidInputError(f"G({u * u:.17g}) = {g:.6g} < 0 for {profile.name}")
        return math.sqrt(g)

    finite = not math.isinf(profile.x0)
    end = math.sqrt(profile.x0) if finite else math.inf
    max_steps = min(budget, MAX_DYADIC_DEPTH) if finite else budget

    trace: List[Tuple[float, float, float]] = []
    total = 0.0
    previous_cut = 0.0
    increments: List[float] = []
    resolved = max_steps == MAX_DYADIC_DEPTH
    for k in range(1, max_steps + 1):
        cut = end * (1.0 - 2.0**-k) if finite else 2.0 ** (k - 1)
        try:
            piece = integrate(integrand, previous_cut, cut, tol=tol, max_panels=PROBE_MAX_PANELS).value
        except (QuadratureFailure, DomainError) as exc:
            # 1 - u^2 runs out of digits near a finite endpoint.
            logger.debug("completeness probe of %s stopped at cutoff %.17g: %s", profile.name, cut, exc)
            resolved = True
            break
        total += piece
        increments.append(piece)
        trace.append((cut, total, piece))
        previous_cut = cut
        if len(increments) < 2 or increments[-2] <= 0:
            continue
        ratio = increments[-1] / increments[-2]
        if total > DIVERGENCE_THRESHOLD and ratio >= DIVERGENCE_RATIO:
            return _completeness("complete", total, trace, profile)
        tail = piece * ratio / (1.0 - ratio) if ratio < 1.0 else math.inf
        if piece < TAIL_TOLERANCE and tail < TAIL_TOLERANCE:
            return _completeness("incomplete", total, trace, profile)

    if finite and resolved and len(increments) > LOG_DIVERGENCE_WINDOW:
        window = increments[-LOG_DIVERGENCE_WINDOW - 1 :]
        ratios = [b / a for a, b in zip(window, window[1:]) if a > 0]
        flat = len(ratios) == LOG_DIVERGENCE_WINDOW and ratios[-1] >= 1.0 - LOG_DIVERGENCE_FLATNESS
        if flat and min(ratios) >= LOG_DIVERGENCE_RATIO:
            return _completeness("complete", total, trace, profile)
    return _completeness("inconclusive", total, trace, profile)


def _completeness(verdict: str, total: float, trace: List[Tuple[float, float, float]], profile: HartogsProfile) -> CompletenessCheck:
    logger.info("completeness of %s: %s after %d cutoffs (integral %.6g)", profile.name, verdict, len(trace), total)
    return CompletenessCheck(verdict, total, tuple(trace))


def membership(profile: HartogsProfile, p: DomainPoint) -> bool:
    """True iff x < x0 and s < F(x)."""
    x = p.x
    if not x < profile.x0:
        return False
    return p.s < float(profile.raw_jet(x)[0])


def interior(profile: HartogsProfile, p: DomainPoint) -> Tuple[float, float, float, float]:
    """(x, s, F(x), D) for a point clear of the boundary guard."""
    if not membership(profile, p):
        raise DomainError(f"point {p.coords} is not in the domain of {profile.name}")
    x, s = p.x, p.s
    f = jet(profile, x)[0]
    d = f - s
    if d < BOUNDARY_DELTA * f:
        raise DomainError(f"point {p.coords} is within the boundary guard of {profile.name}")
    return x, s, f, d


def potential(profile: HartogsProfile, p: DomainPoint) -> float:
    """Kähler potential -log(F(x) - s)."""
    return -math.log(interior(profile, p)[3])
