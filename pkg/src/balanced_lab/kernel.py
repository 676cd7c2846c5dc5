"""Monomial norms, reproducing kernels on the diagonal and the Engliš parameter.

The monomials z^j are orthogonal in the weighted Bergman space H_{mΦ}; with
j_tail = j1 + ... + j_{n-1} their squared norms are

    pi^n * j1! ... j_{n-1}! (m-n-1)! / (m+j_tail-2)! * c_{j0}(F^{m+j_tail}).

Factorials go through ``gammaln`` and the moments through their logarithms,
so large orders neither overflow nor underflow.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, InvalidInputError, NumericalFailure, TrivialSpaceError
from .profile import DomainPoint, HartogsProfile, interior
from .quadrature import DEFAULT_TOL, MomentTable, moment_table
from .sampling import x_half

logger = logging.getLogger(__name__)

LOG_PI = math.log(math.pi)
SERIES_W_LIMIT = 0.98
DEFAULT_SERIES_TOL = 1e-10
DEFAULT_DEGREE_CAP = 4096
DEFAULT_K_MAX = 64
RADIUS_FRACTION = 0.9
MIN_TABLE = 32


@dataclass(frozen=True)
class MultiIndex:
    j: Tuple[int, ...]

    def __init__(self, j: Sequence[int]):
        if len(j) < 1 or any(int(v) != v or v < 0 for v in j):
            raise InvalidInputError(f"multi-index entries must be non-negative integers, got {tuple(j)}")
        object.__setattr__(self, "j", tuple(int(v) for v in j))

    @property
    def n(self) -> int:
        return len(self.j)

    @property
    def j_tail(self) -> int:
        return sum(self.j[1:])


@dataclass(frozen=True)
class KernelEvaluation:
    value: float
    truncation_bound: float
    quadrature_bound: float
    shells: int
    method: str

    @property
    def error_budget(self) -> float:
        return self.truncation_bound + self.quadrature_bound


@dataclass(frozen=True)
class GammaEstimate:
    gamma_hat: float
    residual: float
    probes: Tuple[Tuple[int, float], ...]
    probe_residuals: Tuple[float, ...]


def require_nontrivial(m: int, n: int) -> None:
    if m <= n:
        raise TrivialSpaceError(m, n)


def log_leading_product(m: int, n: int) -> float:
    """log of (m-2)(m-3)...(m-n); 0 for the empty product at n = 1."""
    return float(gammaln(m - 1) - gammaln(m - n))


def _table(profile: HartogsProfile, m: int, k_needed: int, tol: float) -> MomentTable:
    k_max = MIN_TABLE
    while k_max < k_needed:
        k_max *= 2
    return moment_table(profile, k_max, m, tol)


def monomial_norm(profile: HartogsProfile, j: MultiIndex, m: int, n: int, tol: float = DEFAULT_TOL) -> float:
    """Squared norm of z^j in H_{mΦ}."""
    if j.n != n:
        raise InvalidInputError(f"multi-index has {j.n} entries, dimension is {n}")
    require_nontrivial(m, n)
    big_m = m + j.j_tail
    log_c = _table(profile, big_m, j.j[0], tol).log_values[j.j[0]]
    log_norm = (
        n * LOG_PI
        + float(sum(gammaln(v + 1) for v in j.j[1:]))
        + float(gammaln(m - n))
        - float(gammaln(big_m - 1))
        + log_c
    )
    return math.exp(log_norm)


def _series_row(
    profile: HartogsProfile,
    m: int,
    j_tail: int,
    log_x: float,
    head: float,
    k_limit: int,
    width: int,
    quad_tol: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Terms of row ``j_tail`` for j0 = 0..min(width, k_limit), with their quadrature errors."""
    table = _table(profile, m + j_tail, min(width, k_limit), quad_tol)
    count = min(table.k_max, k_limit) + 1
    ks = np.arange(count)
    if math.isinf(log_x):
        powers = np.where(ks == 0, 0.0, -np.inf)
    else:
        powers = ks * log_x
    terms = np.exp(head + powers - np.asarray(table.log_values[:count]))
    return terms, terms * np.asarray(table.rel_errors[:count])


def _geometric_cut(terms: np.ndarray, floor: float, tol: float) -> Optional[int]:
    """First index >= 1 whose term is below tol of the running sum and shrinking."""
    if len(terms) < 2:
        return None
    sums = floor + np.cumsum(terms)
    before = terms[:-1]
    ratios = np.divide(terms[1:], before, out=np.zeros_like(before), where=before > 0)
    hits = np.flatnonzero((terms[1:] <= tol * sums[1:]) & (ratios < 1.0))
    return int(hits[0]) + 1 if hits.size else None


def _ratio(last: float, previous: float) -> float:
    return last / previous if previous > 0 else 0.0


def _geometric_tail(last: float, ratio: float) -> float:
    return last * ratio / (1.0 - ratio)


def kernel_series(
    profile: HartogsProfile,
    p: DomainPoint,
    m: int,
    tol: float = DEFAULT_SERIES_TOL,
    degree_cap: int = DEFAULT_DEGREE_CAP,
    quad_tol: float = DEFAULT_TOL,
) -> KernelEvaluation:
    """K(z, z) as a double series over (j0, j_tail).

    Monomials sharing j0 and j_tail merge through the multinomial theorem into
    one term carrying s^j_tail / j_tail!. Each row of fixed j_tail is summed
    along j0 until a term falls below tol of the running total with a ratio
    under 1, and the rows stop the same way; both geometric tails enter the
    truncation bound. No term of total degree above ``degree_cap`` is summed.
    """
    x, s, f, _ = interior(profile, p)
    n = p.n
    require_nontrivial(m, n)
    w = s / f
    if w >= SERIES_W_LIMIT:
        raise DomainError(f"w={w:.4f} >= {SERIES_W_LIMIT}: series tail bound unusable, use the closed form")

    log_x = math.log(x) if x > 0 else -math.inf
    log_s = math.log(s) if s > 0 else -math.inf
    base = -float(gammaln(m - n)) - n * LOG_PI
    last_row = 0 if n == 1 or s == 0 else degree_cap
    total = truncation = quad_bound = 0.0
    top_degree = 0
    previous = math.nan
    width = MIN_TABLE
    for j_tail in range(last_row + 1):
        head = (j_tail * log_s if j_tail else 0.0) - float(gammaln(j_tail + 1)) + float(gammaln(m + j_tail - 1)) + base
        k_limit = degree_cap - j_tail
        while True:
            terms, errors = _series_row(profile, m, j_tail, log_x, head, k_limit, width, quad_tol)
            cut = _geometric_cut(terms, total, tol)
            if cut is not None or len(terms) > k_limit:
                break
            width *= 2
        if cut is None:
            partial = KernelEvaluation(total + float(terms.sum()), math.inf, quad_bound, degree_cap + 1, "series")
            raise NumericalFailure(f"kernel series did not converge within degree {degree_cap}", partial=partial)
        row = float(terms[: cut + 1].sum())
        row_tail = _geometric_tail(float(terms[cut]), _ratio(float(terms[cut]), float(terms[cut - 1])))
        total += row
        truncation += row_tail
        quad_bound += float(errors[: cut + 1].sum())
        top_degree = max(top_degree, j_tail + cut)
        if last_row == 0:
            break
        if j_tail > 0 and row <= tol * total and row < previous:
            truncation += _geometric_tail(row + row_tail, _ratio(row, previous))
            break
        previous = row
    logger.debug("kernel series converged: %d rows, degree %d", j_tail + 1, top_degree)
    return KernelEvaluation(total, truncation, quad_bound, top_degree + 1, "series")


def log_kernel_closed(profile: HartogsProfile, p: DomainPoint, m: int, gamma: float) -> float:
    """log K(z, z) in closed form; finite even where D^-m overflows."""
    _, s, f, d = interior(profile, p)
    n = p.n
    require_nontrivial(m, n)
    bracket = m - 1 + (1.0 - s / f) * gamma
    if not bracket > 0:
        raise DomainError(f"closed-form kernel is not positive at {p.coords} with gamma={gamma}")
    return log_leading_product(m, n) - n * LOG_PI - m * math.log(d) + math.log(bracket)


def kernel_closed(profile: HartogsProfile, p: DomainPoint, m: int, gamma: float) -> float:
    """Closed-form K(z, z) for a profile satisfying the Engliš identity with ``gamma``."""
    return math.exp(log_kernel_closed(profile, p, m, gamma))


def series_radius_proxy(table: MomentTable) -> float:
    """Ratio-test proxy c_{k_max} / c_{k_max - 1} for the radius of sum t^k / c_k."""
    if table.k_max < 1:
        raise InvalidInputError("radius proxy needs at least two moments")
    return math.exp(table.log_values[-1] - table.log_values[-2])


def _englis_series(profile: HartogsProfile, m: int, t: float, k_max: int, tol: float) -> Tuple[float, float, float]:
    """(sum_{k<=k_max} t^k / c_k(F^m), geometric tail bound, log F(t))."""
    if not 0.0 <= t < profile.x0:
        raise DomainError(f"t={t} outside [0, {profile.x0})")
    table = moment_table(profile, k_max, m, tol)
    radius = series_radius_proxy(table)
    if t > RADIUS_FRACTION * radius:
        raise NumericalFailure(f"t={t} beyond {RADIUS_FRACTION} x series radius proxy {radius:.4g}")
    log_c = np.array(table.log_values)
    ks = np.arange(k_max + 1)
    if t == 0:
        log_terms = np.where(ks == 0, 0.0, -np.inf) - log_c
    else:
        log_terms = ks * math.log(t) - log_c
    terms = np.exp(log_terms)
    total = float(terms.sum())
    ratio = float(terms[-1] / terms[-2]) if terms[-2] > 0 else 0.0
    if ratio >= 1.0:
        raise NumericalFailure(f"series tail not decaying at t={t} (ratio {ratio:.4g})")
    tail = float(terms[-1]) * ratio / (1.0 - ratio)
    log_f = float(profile.log_jet(t)[0])
    return total, tail, log_f


def englis_residual(
    profile: HartogsProfile, m: int, t: float, gamma: float, k_max: int = DEFAULT_K_MAX, tol: float = DEFAULT_TOL
) -> float:
    """Scaled defect of sum_k t^k / c_k(F^m) = (m - 1 + gamma) F(t)^-m."""
    total, tail, log_f = _englis_series(profile, m, t, k_max, tol)
    target = (m - 1 + gamma) * math.exp(-m * log_f)
    if target == 0:
        return math.inf
    return (abs(total - target) + tail) / abs(target)


def default_t_grid(profile: HartogsProfile) -> Tuple[float, ...]:
    half = x_half(profile)
    return tuple(half * r for r in (0.225, 0.45, 0.9))


def estimate_gamma(
    profile: HartogsProfile,
    m_set: Sequence[int] = (2, 3, 4),
    t_grid: Sequence[float] = (),
    k_max: int = DEFAULT_K_MAX,
    tol: float = DEFAULT_TOL,
) -> GammaEstimate:
    """Least-squares γ: the identity is affine in γ, so the fit is a mean."""
    t_grid = tuple(t_grid) or default_t_grid(profile)
    estimates: List[float] = []
    probes: List[Tuple[int, float]] = []
    for m in m_set:
        for t in t_grid:
            try:
                total, _, log_f = _englis_series(profile, m, t, k_max, tol)
            except (NumericalFailure, InvalidInputError) as exc:
                logger.warning("dropping gamma probe m=%d t=%g for %s: %s", m, t, profile.name, exc)
                continue
            estimates.append(math.exp(m * log_f) * total - (m - 1))
            probes.append((m, t))
    if not probes:
        raise NumericalFailure(f"every gamma probe failed for {profile.name}")
    gamma_hat = float(np.mean(estimates))
    residuals = tuple(englis_residual(profile, m, t, gamma_hat, k_max, tol) for m, t in probes)
    logger.info("gamma for %s: %.10g (residual %.3g over %d probes)", profile.name, gamma_hat, max(residuals), len(probes))
    return GammaEstimate(gamma_hat, max(residuals), tuple(probes), residuals)
