"""Point sets over Hartogs domains.

epsilon and the metric invariants depend on a point only through (x, w), so
the samplers work in those coordinates and lift to (sqrt(x), sqrt(wF(x)), 0, ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import InvalidInputError
from .profile import DomainPoint, HartogsProfile

X_CAP_RATIO = 1e-12
CLOSED_FORM_W_MAX = 0.9
SERIES_W_MAX = 0.9


@dataclass(frozen=True)
class SamplingBox:
    x_max: float
    w_max: float


def _log_f(profile: HartogsProfile, x: float) -> float:
    return float(profile.log_jet(x)[0])


def _level_crossing(profile: HartogsProfile, log_ratio: float) -> float:
    """Smallest x with F(x) = F(0) * exp(log_ratio), or x0 if F stays above it."""
    target = _log_f(profile, 0.0) + log_ratio
    if math.isinf(profile.x0):
        hi = 1.0
        while _log_f(profile, hi) > target:
            hi *= 2.0
            if hi > 1e300:
                raise InvalidInputError(f"profile {profile.name} does not decay on [0, inf)")
    else:
        hi = profile.x0 * (1.0 - 1e-12)
        if _log_f(profile, hi) > target:
            return profile.x0
    return float(optimize.brentq(lambda x: _log_f(profile, x) - target, 0.0, hi, xtol=1e-14))


def x_cap(profile: HartogsProfile) -> float:
    """Upper end of x sampling: x0, or where F drops to 1e-12 F(0) if x0 is infinite."""
    if not math.isinf(profile.x0):
        return profile.x0
    return _level_crossing(profile, math.log(X_CAP_RATIO))


def x_half(profile: HartogsProfile) -> float:
    """Where F falls to F(0) / 2 (x0 if it never does)."""
    return _level_crossing(profile, -math.log(2.0))


def box_for(profile: HartogsProfile, method: str) -> SamplingBox:
    if method == "series":
        return SamplingBox(x_half(profile), SERIES_W_MAX)
    return SamplingBox(min(profile.x0, x_cap(profile)), CLOSED_FORM_W_MAX)


def lift(profile: HartogsProfile, x: float, w: float, n: int) -> DomainPoint:
    f = float(profile.raw_jet(x)[0])
    return DomainPoint.from_radial(x, w * f if n > 1 else 0.0, n)


def halton_points(profile: HartogsProfile, box: SamplingBox, n: int, count: int, seed: int) -> List[DomainPoint]:
    """Scrambled Halton points over [0, x_max) x [0, w_max), lifted to the domain."""
    if count < 1:
        raise InvalidInputError(f"sample count must be >= 1, got {count}")
    sampler = qmc.Halton(d=2, scramble=True, rng=np.random.default_rng(seed))
    unit = sampler.random(count)
    return [lift(profile, float(u * box.x_max), float(v * box.w_max), n) for u, v in unit]


def random_member_points(
    profile: HartogsProfile, n: int, count: int, seed: int, w_max: float = CLOSED_FORM_W_MAX
) -> List[DomainPoint]:
    """Random points with random phases and the tail mass spread over all z_k."""
    rng = np.random.default_rng(seed)
    x_hi = min(profile.x0, x_cap(profile))
    points = []
    for _ in range(count):
        x = float(rng.uniform(0.0, x_hi))
        w = float(rng.uniform(0.0, w_max))
        s = w * float(profile.raw_jet(x)[0])
        z0 = math.sqrt(x) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        tail = rng.dirichlet(np.ones(n - 1)) * s if n > 1 else np.zeros(0)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, size=n - 1))
        points.append(DomainPoint([z0, *(np.sqrt(tail) * phases)]))
    return points


def curvature_grid(profile: HartogsProfile, n: int, size: int, w_max: float = 0.8) -> List[DomainPoint]:
    """Tensor grid of about ``size`` points over [0, x_half) x [0, w_max)."""
    if size < 1:
        raise InvalidInputError(f"grid size must be >= 1, got {size}")
    x_hi = x_half(profile)
    if n == 1:
        return [lift(profile, x_hi * (i + 0.5) / size, 0.0, 1) for i in range(size)]
    side = max(1, int(round(math.sqrt(size))))
    return [
        lift(profile, x_hi * (i + 0.5) / side, w_max * (j + 0.5) / side, n)
        for i in range(side)
        for j in range(side)
    ]
