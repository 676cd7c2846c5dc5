"""Adaptive Gauss-Kronrod quadrature and the moment integrals c_k(F^m).

Panels use the 7-point Gauss / 15-point Kronrod pair. Both rules are open, so
integrable endpoint singularities need no special casing. The error estimate
of a panel is the plain difference |K15 - G7|, which is pessimistic on smooth
integrands. Semi-infinite intervals are mapped onto [0, 1) with
t = a + u / (1 - u).

The batch driver integrates vector-valued integrands on one shared panel
tree; a moment table for k = 0..k_max costs one adaptive run.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from .errors import InvalidInputError, QuadratureFailure
from .profile import HartogsProfile, from_unit, g_from_ratios, kahler_check

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
MAX_PANELS = 2**20
PROBE_POINTS = 512

_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)

# 15 nodes on [-1, 1] in ascending order with matching weights.
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    evaluations: int


@dataclass(frozen=True)
class BatchResult:
    values: np.ndarray
    errors: np.ndarray
    evaluations: int
    panels: int


@dataclass(frozen=True)
class MomentTable:
    """c_k(F^m) for k = 0..k_max with error estimates.

    ``log_values`` hold log c_k exactly even when c_k itself would overflow
    or underflow a float.
    """

    profile: str
    m: int
    entries: Dict[int, QuadratureResult]
    log_values: Tuple[float, ...]
    rel_errors: Tuple[float, ...]

    @property
    def k_max(self) -> int:
        return len(self.log_values) - 1

    def __getitem__(self, k: int) -> QuadratureResult:
        return self.entries[k]

    def values(self) -> Tuple[float, ...]:
        return tuple(self.entries[k].value for k in range(self.k_max + 1))


def _panel_rules(f: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Kronrod and Gauss sums for each panel [lo_i, hi_i]; f is called once."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = mid[:, None] + half[:, None] * NODES[None, :]
    values = np.asarray(f(nodes.ravel()), dtype=float)
    values = values.reshape(len(lo), 15, -1)
    kronrod = np.einsum("pnk,n->pk", values, KRONROD_WEIGHTS) * half[:, None]
    gauss = np.einsum("pnk,n->pk", values, GAUSS_WEIGHTS) * half[:, None]
    return kronrod, gauss


def _to_unit_interval(f: Callable[[np.ndarray], np.ndarray], a: float) -> Callable[[np.ndarray], np.ndarray]:
    def mapped(u: np.ndarray) -> np.ndarray:
        one_minus = 1.0 - u
        values = np.asarray(f(a + u / one_minus), dtype=float)
        jac = 1.0 / (one_minus * one_minus)
        return values * (jac[:, None] if values.ndim == 2 else jac)

    return mapped


def integrate_batch(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    relative: bool = True,
    max_panels: int = MAX_PANELS,
) -> BatchResult:
    """Integrate a vector-valued integrand over [a, b] (b may be +inf).

    ``f`` maps a 1-D array of nodes to an array of shape (nodes, components).
    Converged when every component has error <= tol * |value| (``relative``)
    or <= tol * max(1, |value|).
    """
    if not tol > 0:
        raise InvalidInputError(f"tol must be positive, got {tol}")
    if not a < b:
        raise InvalidInputError(f"empty interval [{a}, {b}]")
    if math.isinf(b):
        f, a, b = _to_unit_interval(f, a), 0.0, 1.0

    lo = np.array([a])
    hi = np.array([b])
    kronrod, gauss = _panel_rules(f, lo, hi)
    evaluations = 15
    while True:
        if not np.all(np.isfinite(kronrod)):
            raise QuadratureFailure(
                "integrand produced NaN or infinite values",
                partial=BatchResult(kronrod.sum(axis=0), np.abs(kronrod - gauss).sum(axis=0), evaluations, len(lo)),
            )
        values = kronrod.sum(axis=0)
        panel_err = np.abs(kronrod - gauss)
        errors = panel_err.sum(axis=0)
        scale = np.abs(values) if relative else np.maximum(1.0, np.abs(values))
        allowed = tol * np.maximum(scale, 1e-300)
        if np.all(errors <= allowed):
            return BatchResult(values, errors, evaluations, len(lo))

        normalized = (panel_err / allowed).max(axis=1)
        worst = normalized >= 0.5 * normalized.max()
        width = hi[worst] - lo[worst]
        centre = np.maximum(1.0, np.abs(0.5 * (hi[worst] + lo[worst])))
        if len(lo) + int(worst.sum()) > max_panels or np.any(width <= 64 * np.finfo(float).eps * centre):
            raise QuadratureFailure(
                f"no convergence after {len(lo)} panels (worst component error {errors.max():.3g})",
                partial=BatchResult(values, errors, evaluations, len(lo)),
            )

        split_lo, split_hi = lo[worst], hi[worst]
        split_mid = 0.5 * (split_lo + split_hi)
        new_lo = np.concatenate([split_lo, split_mid])
        new_hi = np.concatenate([split_mid, split_hi])
        new_k, new_g = _panel_rules(f, new_lo, new_hi)
        evaluations += 15 * len(new_lo)
        keep = ~worst
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kronrod = np.concatenate([kronrod[keep], new_k])
        gauss = np.concatenate([gauss[keep], new_g])
        logger.debug("quadrature refined to %d panels", len(lo))


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = DEFAULT_TOL,
    max_panels: int = MAX_PANELS,
) -> QuadratureResult:
    """Adaptive integral of a scalar function over [a, b] (b may be +inf).

    Stops when the error estimate is <= tol * max(1, |value|).
    """

    def vectorised(ts: np.ndarray) -> np.ndarray:
        return np.array([[f(float(t))] for t in ts], dtype=float)

    try:
        result = integrate_batch(vectorised, a, b, tol=tol, relative=False, max_panels=max_panels)
    except QuadratureFailure as exc:
        partial = exc.partial
        if isinstance(partial, BatchResult):
            exc.partial = QuadratureResult(float(partial.values[0]), float(partial.errors[0]), partial.evaluations)
        raise
    return QuadratureResult(float(result.values[0]), float(result.errors[0]), result.evaluations)


# ---------------------------------------------------------------------------
# Moments
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=256)
def _kahler_ok(profile: HartogsProfile) -> bool:
    return kahler_check(profile).passed


def _log_scales(profile: HartogsProfile, ks: np.ndarray, m: int) -> np.ndarray:
    """Per-k maximum of k log t + m log F on a probe grid."""
    us = (np.arange(PROBE_POINTS) + 0.5) / PROBE_POINTS
    ts = from_unit(us, profile.x0)
    with np.errstate(all="ignore"):
        log_f = np.asarray(profile.log_jet(ts)[0], dtype=float)
        exponent = ks[None, :] * np.log(ts)[:, None] + m * log_f[:, None]
    exponent = np.where(np.isfinite(exponent), exponent, -np.inf)
    scales = exponent.max(axis=0)
    return np.where(np.isfinite(scales), scales, 0.0)


def _moment_integrand(profile: HartogsProfile, ks: np.ndarray, m: int, log_scales: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    def integrand(ts: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            log_f, r1, r2 = (np.asarray(v, dtype=float) for v in profile.log_jet(ts))
            g = np.asarray(g_from_ratios(ts, r1, r2), dtype=float)
            power = np.where(ks[None, :] == 0, 0.0, ks[None, :] * np.log(ts)[:, None])
            values = np.exp(power + m * log_f[:, None] - log_scales[None, :]) * g[:, None]
        vanished = np.isneginf(log_f)
        return np.where(vanished[:, None], 0.0, values)

    return integrand


def _moment_batch(profile: HartogsProfile, ks: np.ndarray, m: int, tol: float) -> MomentTable:
    if not _kahler_ok(profile):
        raise InvalidInputError(f"profile {profile.name} fails the Kähler condition; moments are undefined")
    log_scales = _log_scales(profile, ks, m)
    integrand = _moment_integrand(profile, ks, m, log_scales)
    try:
        batch = integrate_batch(integrand, 0.0, profile.x0, tol=tol, relative=True)
    except QuadratureFailure as exc:
        partial = exc.partial
        failing = 0
        if isinstance(partial, BatchResult):
            bad = np.nonzero(~(partial.errors <= tol * np.abs(partial.values)))[0]
            failing = int(ks[bad[0]]) if len(bad) else int(ks[0])
        logger.warning("moment c_%d(F^%d) of %s failed: %s", failing, m, profile.name, exc)
        raise QuadratureFailure(f"moment c_{failing}(F^{m}) of {profile.name} did not converge: {exc}", partial=partial) from exc

    if np.any(batch.values <= 0):
        k = int(ks[np.nonzero(batch.values <= 0)[0][0]])
        raise QuadratureFailure(f"moment c_{k}(F^{m}) of {profile.name} is not positive")
    log_values = log_scales + np.log(batch.values)
    rel_errors = batch.errors / batch.values
    with np.errstate(over="ignore"):
        values = np.exp(log_values)
        abs_errors = values * rel_errors
    per_k = max(1, batch.evaluations // len(ks))
    entries = {
        int(k): QuadratureResult(float(v), float(e), per_k) for k, v, e in zip(ks, values, abs_errors)
    }
    return MomentTable(profile.name, m, entries, tuple(float(v) for v in log_values), tuple(float(r) for r in rel_errors))


def moment(profile: HartogsProfile, k: int, m: int, tol: float = DEFAULT_TOL) -> QuadratureResult:
    """c_k(F^m) = integral over [0, x0) of t^k F(t)^m G(t)."""
    if k < 0:
        raise InvalidInputError(f"k must be >= 0, got {k}")
    return _moment_batch(profile, np.array([k]), m, tol)[k]


@functools.lru_cache(maxsize=4096)
def moment_table(profile: HartogsProfile, k_max: int, m: int, tol: float = DEFAULT_TOL) -> MomentTable:
    """c_k(F^m) for k = 0..k_max from one shared panel tree; memoised."""
    if k_max < 0:
        raise InvalidInputError(f"k_max must be >= 0, got {k_max}")
    logger.debug("building moment table k<=%d m=%d for %s", k_max, m, profile.name)
    return _moment_batch(profile, np.arange(k_max + 1), m, tol)
