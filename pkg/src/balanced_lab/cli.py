"""balanced-lab command line.

Every subcommand builds a RunConfig from ``--config`` (if any) overlaid with
the flags given, runs one library operation and writes a single report.
Exit codes: 0 when the computation finished (whatever the verdict), 2 for
invalid input or usage errors, 3 for numerical failure.
"""

from __future__ import annotations

import functools
import logging
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence

import click
import numpy as np
from pydantic import ValidationError

from . import epsilon as eps
from . import geometry, kernel, profile as prof, quadrature, report, sampling
from .config import ProfileSpec, RunConfig, load_config, merge_overrides, parse_x0
from .errors import ConfigError, InvalidInputError, NumericalFailure
from .logs import setup_logging
from .session import LabSession

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _profile_override(builtin: Optional[str], expr: Optional[str], x0: Optional[str]) -> Optional[ProfileSpec]:
    if builtin is None and expr is None:
        if x0 is not None:
            raise ConfigError("--x0 needs --profile-expr")
        return None
    if builtin is not None and expr is not None:
        raise ConfigError("--profile and --profile-expr are mutually exclusive")
    try:
        if builtin is not None:
            return ProfileSpec(builtin=builtin, x0=parse_x0(x0) if x0 is not None else None)
        return ProfileSpec(expr=expr, x0=parse_x0(x0) if x0 is not None else None)
    except ValidationError as exc:
        raise ConfigError("; ".join(error["msg"] for error in exc.errors()))


def _build_config(params: Dict[str, Any]) -> RunConfig:
    path = params.pop("config", None)
    spec = _profile_override(params.pop("profile", None), params.pop("profile_expr", None), params.pop("x0", None))
    base = load_config(path) if path else RunConfig()
    if spec is not None:
        params["profile"] = spec
    return merge_overrides(base, params)


def lab_command(name: str, **settings: Any) -> Callable:
    """Register a subcommand taking the shared profile, config and output flags."""

    def decorator(fn: Callable[[RunConfig, LabSession], Any]) -> Callable:
        @functools.wraps(fn)
        def wrapper(**params: Any) -> None:
            config = _build_config(params)
            setup_logging(config)
            logger.debug("running %s (n=%d, m=%d)", name, config.n, config.m)
            with LabSession(config) as session:
                fn(config, session)
            logger.debug("%s finished", name)

        options = [
            click.option("--profile", "profile", help="Builtin profile: hyperbolic, springer, power:<nu>, truncated-hyperbolic:<x0>."),
            click.option("--profile-expr", "profile_expr", help="Expression for F(x), e.g. '1 - x'."),
            click.option("--x0", "x0", help="Domain bound for an expression profile (a number or 'inf')."),
            click.option("--config", "config", type=click.Path(dir_okay=False), help="JSON run configuration."),
            click.option("--out", "out", help="Report path; '-' for standard output."),
            click.option("--format", "format", type=click.Choice(["json", "csv"]), help="Report format."),
            click.option("--log-level", "log_level", help="Logging level."),
            click.option("--log-file", "log_file", help="Also write logs to this file."),
        ]
        for option in reversed(options):
            wrapper = option(wrapper)
        return main_group.command(name, **settings)(wrapper)

    return decorator


@click.group(name="balanced-lab")
def main_group() -> None:
    """Weighted Bergman kernels and balanced-metric checks for Hartogs domains."""


def _fmt(config: RunConfig, default: str) -> str:
    return config.format or default


def _point(config: RunConfig) -> prof.DomainPoint:
    if config.at is None:
        raise InvalidInputError("--at is required")
    return prof.DomainPoint(config.at)


@lab_command("check-kahler")
@click.option("--grid-size", "grid_size", type=int, help="Number of grid points.")
def check_kahler(config: RunConfig, session: LabSession) -> None:
    """Sample G = -(tF'/F)' and report its minimum."""
    profile = config.profile.build()
    result = prof.kahler_check(profile, config.grid_size)
    document = report.new_report(
        "check-kahler",
        profile,
        grid_size=result.grid_size,
        min_G=result.min_G,
        argmin_t=result.argmin_t,
        decreasing=result.decreasing,
        **{"pass": result.passed},
    )
    report.emit(report.dumps(document), config.out)


@lab_command("check-complete")
@click.option("--budget", "budget", type=int, help="Number of cutoffs.")
@click.option("--quad-tol", "quad_tol", type=float, help="Quadrature tolerance.")
def check_complete(config: RunConfig, session: LabSession) -> None:
    """Probe divergence of the radial length integral."""
    profile = config.profile.build()
    result = prof.completeness_check(profile, config.budget, config.quad_tol)
    document = report.new_report(
        "check-complete",
        profile,
        verdict=result.verdict,
        integral=result.integral,
        trace=[list(row) for row in result.trace],
    )
    report.emit(report.dumps(document), config.out)


@lab_command("moments")
@click.option("--k-max", "k_max", type=int, help="Highest moment order.")
@click.option("--m", "m", type=int, help="Weight exponent.")
@click.option("--quad-tol", "quad_tol", type=float, help="Quadrature tolerance.")
def moments(config: RunConfig, session: LabSession) -> None:
    """Moments c_k(F^m) for k = 0..k_max."""
    profile = config.profile.build()
    table = quadrature.moment_table(profile, config.k_max, config.m, config.quad_tol)
    rows = [(k, table[k].value, table[k].abs_error_estimate) for k in range(table.k_max + 1)]
    if _fmt(config, "csv") == "csv":
        report.emit(report.csv_text(("k", "c_k", "err"), rows), config.out)
        return
    document = report.new_report(
        "moments",
        profile,
        m=config.m,
        k_max=config.k_max,
        moments=[{"k": k, "c_k": v, "err": e} for k, v, e in rows],
    )
    report.emit(report.dumps(document), config.out)


@lab_command("gamma")
@click.option("--m-set", "m_set", help="Comma-separated weights.")
@click.option("--t-grid", "t_grid", help="Comma-separated probe points.")
@click.option("--k-max", "k_max", type=int, help="Moments per probe.")
@click.option("--quad-tol", "quad_tol", type=float, help="Quadrature tolerance.")
def gamma(config: RunConfig, session: LabSession) -> None:
    """Estimate the Engliš parameter γ."""
    profile = config.profile.build()
    estimate = kernel.estimate_gamma(profile, config.m_set, config.t_grid, config.k_max, config.quad_tol)
    document = report.new_report(
        "gamma",
        profile,
        gamma_hat=estimate.gamma_hat,
        residual=estimate.residual,
        probes=[
            {"m": m, "t": t, "residual": r} for (m, t), r in zip(estimate.probes, estimate.probe_residuals)
        ],
    )
    report.emit(report.dumps(document), config.out)


@lab_command("kernel")
@click.option("--at", "at", help="Point coordinates z0,...,z_{n-1}; complex entries as 0.3+0.1j.")
@click.option("--m", "m", type=int, help="Weight exponent.")
@click.option("--method", "method", type=click.Choice(eps.METHODS), help="Series or closed form.")
@click.option("--tol", "tol", type=float, help="Relative series truncation tolerance.")
@click.option("--degree-cap", "degree_cap", type=int, help="Highest total degree.")
def kernel_command(config: RunConfig, session: LabSession) -> None:
    """Reproducing kernel K(z, z) at one point."""
    profile = config.profile.build()
    p = _point(config)
    if config.method == eps.SERIES:
        evaluation = kernel.kernel_series(
            profile,
            p,
            config.m,
            tol=config.tol or kernel.DEFAULT_SERIES_TOL,
            degree_cap=config.degree_cap,
            quad_tol=config.quad_tol,
        )
        fields = {
            "value": evaluation.value,
            "truncation_bound": evaluation.truncation_bound,
            "quadrature_bound": evaluation.quadrature_bound,
            "error_budget": evaluation.error_budget,
            "shells": evaluation.shells,
        }
    else:
        estimate = eps.profile_gamma(profile)
        if estimate.residual > eps.GAMMA_RESIDUAL_LIMIT:
            raise NumericalFailure(
                f"gamma residual {estimate.residual:.3g} exceeds {eps.GAMMA_RESIDUAL_LIMIT:g}; "
                "the closed form does not apply, use --method series"
            )
        value = kernel.kernel_closed(profile, p, config.m, estimate.gamma_hat)
        fields = {"value": value, "gamma": estimate.gamma_hat, "error_budget": value * estimate.residual}
    document = report.new_report(
        "kernel", profile, n=p.n, m=config.m, method=config.method, point=report.point_fields(p), **fields
    )
    report.emit(report.dumps(document), config.out)


@lab_command("epsilon")
@click.option("--at", "at", help="Point coordinates; without it, --samples points are drawn.")
@click.option("--n", "n", type=int, help="Complex dimension.")
@click.option("--m", "m", type=int, help="Weight exponent.")
@click.option("--method", "method", type=click.Choice(eps.METHODS), help="Series or closed form.")
@click.option("--samples", "samples", type=int, help="Number of sampled points.")
@click.option("--seed", "seed", type=int, help="Sampler seed.")
def epsilon_command(config: RunConfig, session: LabSession) -> None:
    """ε_{mg} at one point or over sampled points."""
    profile = config.profile.build()
    if config.at is not None:
        sample = eps.epsilon_at(profile, _point(config), config.m, method=config.method)
        document = report.new_report("epsilon", profile, n=sample.point.n, m=config.m, method=config.method, **report.sample_fields(sample))
        report.emit(report.dumps(document), config.out)
        return
    box = sampling.box_for(profile, config.method)
    points = sampling.halton_points(profile, box, config.n, config.samples, config.seed)
    samples = session.map(lambda p: eps.epsilon_at(profile, p, config.m, method=config.method), points)
    if _fmt(config, "json") == "csv":
        rows = [(s.point.x, s.w, s.epsilon, s.error_budget) for s in samples]
        report.emit(report.csv_text(("x", "w", "epsilon", "error_budget"), rows), config.out)
        return
    document = report.new_report(
        "epsilon",
        profile,
        n=config.n,
        m=config.m,
        method=config.method,
        seed=config.seed,
        samples=[report.sample_fields(s) for s in samples],
    )
    report.emit(report.dumps(document), config.out)


@lab_command("balanced")
@click.option("--n", "n", type=int, help="Complex dimension.")
@click.option("--m", "m", type=int, help="Weight exponent.")
@click.option("--samples", "samples", type=int, help="Number of sampled points.")
@click.option("--tol", "tol", type=float, help="Relative spread tolerance.")
@click.option("--seed", "seed", type=int, help="Sampler seed.")
@click.option("--method", "method", type=click.Choice(eps.METHODS), help="Series or closed form.")
def balanced(config: RunConfig, session: LabSession) -> None:
    """Balanced verdict at one weight."""
    profile = config.profile.build()
    verdict = eps.balanced_verdict(
        profile, config.m, config.n, config.samples, config.tol, config.seed, config.method, session.pool
    )
    document = report.new_report(
        "balanced",
        profile,
        n=config.n,
        seed=config.seed,
        certification=report.CERTIFICATION,
        **report.verdict_fields(verdict),
    )
    report.emit(report.dumps(document), config.out)


@lab_command("quantization-scan")
@click.option("--n", "n", type=int, help="Complex dimension.")
@click.option("--m-from", "m_from", type=int, help="First weight (default n+1).")
@click.option("--m-to", "m_to", type=int, help="Last weight (default n+5).")
@click.option("--samples", "samples", type=int, help="Sampled points per weight.")
@click.option("--tol", "tol", type=float, help="Relative spread tolerance.")
@click.option("--seed", "seed", type=int, help="Sampler seed.")
@click.option("--method", "method", type=click.Choice(eps.METHODS), help="Series or closed form.")
def quantization_scan(config: RunConfig, session: LabSession) -> None:
    """Balanced verdicts over a range of weights."""
    profile = config.profile.build()
    m_from = config.m_from if config.m_from is not None else config.n + 1
    m_to = config.m_to if config.m_to is not None else config.n + 5
    scan = eps.regular_quantization_scan(
        profile, m_from, m_to, config.n, config.samples, config.tol, config.seed, config.method, session.pool
    )
    document = report.new_report(
        "quantization-scan",
        profile,
        n=config.n,
        m_from=m_from,
        m_to=m_to,
        seed=config.seed,
        certification=report.CERTIFICATION,
        all_balanced=scan.all_balanced,
        verdicts=[report.verdict_fields(v, with_samples=False) for v in scan.verdicts],
    )
    report.emit(report.dumps(document), config.out)


@lab_command("curvature")
@click.option("--n", "n", type=int, help="Complex dimension.")
@click.option("--grid", "grid", type=int, help="Number of grid points.")
@click.option("--h", "h", type=float, help="Finite-difference step.")
@click.option("--tol", "tol", type=float, help="Relative spread tolerance.")
def curvature(config: RunConfig, session: LabSession) -> None:
    """Scalar curvature over a grid and whether it is constant."""
    profile = config.profile.build()
    grid = sampling.curvature_grid(profile, config.n, config.grid)
    tol = config.tol if config.tol is not None else geometry.DEFAULT_CURVATURE_TOL
    scan = geometry.curvature_scan(profile, grid, config.h, tol, session.pool)
    if _fmt(config, "json") == "csv":
        rows = [(p.x, p.s, s) for p, s in scan.points]
        report.emit(report.csv_text(("x", "s", "scalar_curvature"), rows), config.out)
        return
    document = report.new_report(
        "curvature",
        profile,
        n=config.n,
        mean=scan.mean,
        spread=scan.spread,
        constant=scan.constant,
        dropped=scan.dropped,
        points=[{"point": report.point_fields(p), "scalar_curvature": s} for p, s in scan.points],
    )
    report.emit(report.dumps(document), config.out)


@lab_command("volume-check")
@click.option("--n", "n", type=int, help="Complex dimension.")
@click.option("--samples", "samples", type=int, help="Number of random member points.")
@click.option("--seed", "seed", type=int, help="Sampler seed.")
def volume_check(config: RunConfig, session: LabSession) -> None:
    """Compare det g with F^2 G / D^(n+1) at random member points."""
    profile = config.profile.build()
    points = sampling.random_member_points(profile, config.n, config.samples, config.seed)
    checks = session.map(lambda p: geometry.volume_density(profile, p), points)
    defects = np.array([c.defect for c in checks])
    document = report.new_report(
        "volume-check",
        profile,
        n=config.n,
        samples=config.samples,
        seed=config.seed,
        max_defect=float(defects.max()),
        mean_defect=float(defects.mean()),
    )
    report.emit(report.dumps(document), config.out)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    args: List[str] = list(sys.argv[1:] if argv is None else argv)
    try:
        result = main_group.main(args=args, prog_name="balanced-lab", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INVALID
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    except InvalidInputError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except NumericalFailure as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERICAL
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(run())
