"""Kähler metric of Φ_F = -log(F(|z0|^2) - ||z||^2) and its invariants.

Components g_{αβ̄} = ∂²Φ/∂z_α∂z̄_β, with x = |z0|^2, s = ||z||^2, D = F(x) - s
and k, l >= 1:

    g_{00̄} = -(F''x + F')/D + F'^2 x/D^2
    g_{0l̄} = -F' z̄0 z_l / D^2
    g_{kl̄} = δ_{kl}/D + z̄_k z_l / D^2

The determinant has the closed form F^2 G / D^(n+1). Scalar curvature uses
R_{αβ̄} = -∂_α∂_β̄ log det g and S = 2 tr(g^-1 R), so the ball of dimension n
has S = -2n(n+1).
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import BalancedLabError, DomainError, InvalidInputError, NumericalFailure
from .profile import DomainPoint, HartogsProfile, g_from_ratios, interior, jet
from .session import ordered_map

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
MARGIN_FACTOR = 4.0
MAX_CONDITION = 1e12
DEFAULT_CURVATURE_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class MetricSample:
    point: DomainPoint
    g: np.ndarray
    det_g: float
    scalar_curvature: Optional[float] = None


@dataclass(frozen=True)
class VolumeCheck:
    det_g: float
    closed_form: float
    defect: float


@dataclass(frozen=True)
class CurvatureScan:
    constant: bool
    spread: float
    mean: float
    points: Tuple[Tuple[DomainPoint, float], ...]
    dropped: int


def metric_tensor(profile: HartogsProfile, p: DomainPoint) -> MetricSample:
    """Analytic g at p, assembled from the 2-jet of F."""
    x, _, _, d = interior(profile, p)
    _, df, d2f = jet(profile, x)
    z = p.as_array()
    n = p.n
    g = np.zeros((n, n), dtype=complex)
    g[0, 0] = -(d2f * x + df) / d + df * df * x / d**2
    if n > 1:
        tail = z[1:]
        g[0, 1:] = -df * np.conj(z[0]) * tail / d**2
        g[1:, 0] = -df * z[0] * np.conj(tail) / d**2
        g[1:, 1:] = np.eye(n - 1) / d + np.outer(np.conj(tail), tail) / d**2
    return MetricSample(p, g, hermitian_det(g))


def hermitian_det(g: np.ndarray) -> float:
    """det of a Hermitian positive-definite matrix via Cholesky of its unit-diagonal scaling."""
    diag = g.diagonal().real
    if np.any(diag <= 0):
        raise NumericalFailure("metric is not positive definite")
    scale = 1.0 / np.sqrt(diag)
    try:
        chol = np.linalg.cholesky(g * scale[:, None] * scale[None, :])
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("metric is not positive definite") from exc
    return float(np.prod(diag) * np.prod(np.abs(chol.diagonal()) ** 2))


def _real_coords(z: np.ndarray) -> np.ndarray:
    return np.column_stack([z.real, z.imag]).ravel()


def _from_real(r: np.ndarray) -> np.ndarray:
    return r[0::2] + 1j * r[1::2]


def _require_margin(profile: HartogsProfile, p: DomainPoint, h: float) -> None:
    """Every displacement of MARGIN_FACTOR * h along a real axis stays interior."""
    if not h > 0:
        raise InvalidInputError(f"finite-difference step must be positive, got {h}")
    r = _real_coords(p.as_array())
    for axis, sign in itertools.product(range(len(r)), (1.0, -1.0)):
        shifted = r.copy()
        shifted[axis] += sign * MARGIN_FACTOR * h
        try:
            interior(profile, DomainPoint(_from_real(shifted)))
        except DomainError as exc:
            raise DomainError(f"point {p.coords} lacks a {MARGIN_FACTOR}h margin for h={h}") from exc


def wirtinger_hessian(f: Callable[[np.ndarray], float], z: np.ndarray, h: float) -> np.ndarray:
    """Central-difference ∂²f/∂z_α∂z̄_β of a real function of complex coordinates."""
    r = _real_coords(z)
    dim = len(r)
    hess = np.zeros((dim, dim))
    for i, j in itertools.combinations_with_replacement(range(dim), 2):
        values = []
        for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            shifted = r.copy()
            shifted[i] += si * h
            shifted[j] += sj * h
            values.append(f(_from_real(shifted)))
        f_pp, f_pm, f_mp, f_mm = values
        hess[i, j] = hess[j, i] = (f_pp - f_pm - f_mp + f_mm) / (4.0 * h * h)
    xs, ys = slice(0, dim, 2), slice(1, dim, 2)
    return 0.25 * (hess[xs, xs] + hess[ys, ys] + 1j * (hess[xs, ys] - hess[ys, xs]))


def _potential_of(profile: HartogsProfile) -> Callable[[np.ndarray], float]:
    def phi(z: np.ndarray) -> float:
        x = abs(z[0]) ** 2
        s = float(np.sum(np.abs(z[1:]) ** 2))
        return -math.log(float(profile.raw_jet(x)[0]) - s)

    return phi


def _log_det_of(profile: HartogsProfile, n: int) -> Callable[[np.ndarray], float]:
    """log(F^2 G / D^(n+1)) with D = F (1 - w), from the log-jet of F."""

    def log_det(z: np.ndarray) -> float:
        x = abs(z[0]) ** 2
        s = float(np.sum(np.abs(z[1:]) ** 2))
        log_f, r1, r2 = (float(v) for v in profile.log_jet(x))
        g = float(g_from_ratios(x, r1, r2))
        log_d = log_f + math.log1p(-s * math.exp(-log_f))
        return 2.0 * log_f + math.log(g) - (n + 1) * log_d

    return log_det


def default_step(p: DomainPoint) -> float:
    return DEFAULT_STEP * max(1.0, float(np.max(np.abs(p.as_array()))))


def metric_fd_check(profile: HartogsProfile, p: DomainPoint, h: float = DEFAULT_STEP) -> float:
    """Max |g_analytic - g_fd| with the mixed Wirtinger Hessian of Φ at step h."""
    _require_margin(profile, p, h)
    analytic = metric_tensor(profile, p).g
    numeric = wirtinger_hessian(_potential_of(profile), p.as_array(), h)
    return float(np.max(np.abs(analytic - numeric)))


def volume_density(profile: HartogsProfile, p: DomainPoint) -> VolumeCheck:
    """det g against F^2 G / D^(n+1)."""
    x, _, _, d = interior(profile, p)
    det_g = metric_tensor(profile, p).det_g
    log_f, r1, r2 = (float(v) for v in profile.log_jet(x))
    g = float(g_from_ratios(x, r1, r2))
    closed_form = math.exp(2.0 * log_f + math.log(g) - (p.n + 1) * math.log(d))
    defect = abs(det_g - closed_form) / abs(closed_form)
    return VolumeCheck(det_g, closed_form, defect)


def scalar_curvature(profile: HartogsProfile, p: DomainPoint, h: Optional[float] = None) -> float:
    """S = 2 tr(g^-1 R) with R from differenced log det g, Richardson-extrapolated once."""
    h = default_step(p) if h is None else h
    _require_margin(profile, p, h)
    g = metric_tensor(profile, p).g
    condition = float(np.linalg.cond(g))
    if condition > MAX_CONDITION:
        raise NumericalFailure(f"metric at {p.coords} is ill-conditioned (cond {condition:.3g})")
    log_det = _log_det_of(profile, p.n)
    z = p.as_array()
    coarse = wirtinger_hessian(log_det, z, h)
    fine = wirtinger_hessian(log_det, z, h / 2.0)
    ricci = -(4.0 * fine - coarse) / 3.0
    return float(2.0 * np.trace(np.linalg.solve(g, ricci)).real)


def _curvature_or_none(profile: HartogsProfile, p: DomainPoint, h: Optional[float]) -> Optional[float]:
    try:
        return scalar_curvature(profile, p, h)
    except BalancedLabError as exc:
        logger.warning("dropping curvature point %s for %s: %s", p.coords, profile.name, exc)
        return None


def curvature_scan(
    profile: HartogsProfile,
    grid: Sequence[DomainPoint],
    h: Optional[float] = None,
    tol: float = DEFAULT_CURVATURE_TOL,
    pool: Optional[Executor] = None,
) -> CurvatureScan:
    """Scalar curvature over ``grid``; constant iff (max - min) / max(|mean|, 1) <= tol."""
    values = ordered_map(lambda p: _curvature_or_none(profile, p, h), grid, pool)
    kept = tuple((p, v) for p, v in zip(grid, values) if v is not None)
    if not kept:
        raise NumericalFailure(f"every curvature point failed for {profile.name}")
    curvatures = np.array([v for _, v in kept])
    mean = float(curvatures.mean())
    spread = float((curvatures.max() - curvatures.min()) / max(abs(mean), 1.0))
    constant = spread <= tol
    logger.info("curvature of %s: mean %.8g, spread %.3g, constant=%s", profile.name, mean, spread, constant)
    return CurvatureScan(constant, spread, mean, kept, len(grid) - len(kept))


def tail_rotation(p: DomainPoint, u: np.ndarray) -> DomainPoint:
    """Apply the unitary ``u`` to (z1, ..., z_{n-1})."""
    u = np.asarray(u, dtype=complex)
    dim = p.n - 1
    if u.shape != (dim, dim):
        raise InvalidInputError(f"rotation must be {dim}x{dim}, got {u.shape}")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-12):
        raise InvalidInputError("rotation matrix is not unitary")
    z = p.as_array()
    return DomainPoint([z[0], *(u @ z[1:])])
