"""Configuration classes for balanced-lab runs."""

import json
import math
import os
from pathlib import Path
from typing import Any, Literal, Mapping, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .profile import HartogsProfile, builtin

THREADS_ENV = "BALANCED_LAB_THREADS"


def _env_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1, got {threads}")
    return threads


def _coordinate(item: Any) -> complex:
    if isinstance(item, str):
        return complex(item.replace(" ", ""))
    if isinstance(item, (list, tuple)):
        return complex(*item)
    return complex(item)


def parse_x0(value: Any) -> Any:
    """Accept the string "inf" for an unbounded profile."""
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    return value


class ProfileSpec(BaseModel):
    """Where the profile F comes from: a builtin name or an expression with x0."""

    builtin: Optional[str] = Field(default=None, description="Builtin profile name, e.g. 'springer' or 'power:2.5'")
    expr: Optional[str] = Field(default=None, description="Expression text for F(x)")
    x0: Optional[float] = Field(default=None, description="Domain bound for |z0|^2; the string 'inf' is accepted")

    @field_validator("x0", mode="before")
    @classmethod
    def _read_x0(cls, value: Any) -> Any:
        return parse_x0(value)

    @model_validator(mode="after")
    def _one_source(self) -> "ProfileSpec":
        if (self.builtin is None) == (self.expr is None):
            raise ValueError("exactly one of 'builtin' and 'expr' is required")
        if self.builtin is not None:
            if self.x0 is not None:
                raise ValueError("'x0' is fixed by the builtin and must not be given")
            try:
                builtin(self.builtin)
            except ConfigError as exc:
                raise ValueError(str(exc))
        elif self.x0 is None:
            raise ValueError("'x0' is required with 'expr'")
        elif not self.x0 > 0:
            raise ValueError(f"'x0' must be positive, got {self.x0}")
        return self

    def build(self) -> HartogsProfile:
        if self.builtin is not None:
            return builtin(self.builtin)
        return HartogsProfile.from_expression(self.expr, self.x0)

    class Config:
        """Pydantic configuration."""
        extra = "forbid"
        frozen = True


class RunConfig(BaseModel):
    """Everything a balanced-lab subcommand needs."""

    # Profile
    profile: ProfileSpec = Field(
        default_factory=lambda: ProfileSpec(builtin="hyperbolic"), description="Profile source"
    )

    # Dimension and weights
    n: int = Field(default=2, ge=1, description="Complex dimension of the domain")
    m: int = Field(default=4, ge=1, description="Weight exponent")
    m_from: Optional[int] = Field(default=None, ge=1, description="First weight of a quantization scan (default n+1)")
    m_to: Optional[int] = Field(default=None, ge=1, description="Last weight of a quantization scan (default n+5)")
    m_set: Tuple[int, ...] = Field(default=(2, 3, 4), description="Weights probed by the gamma estimate")
    t_grid: Tuple[float, ...] = Field(default=(), description="Probe points for gamma; empty means derived from the profile")

    # Numerics
    tol: Optional[float] = Field(default=None, gt=0, description="Verdict tolerance; default depends on method")
    quad_tol: float = Field(default=1e-10, gt=0, description="Relative quadrature tolerance")
    k_max: int = Field(default=64, ge=1, description="Highest moment order")
    degree_cap: int = Field(default=4096, ge=1, description="Highest total degree summed by the kernel series")
    grid_size: int = Field(default=100, ge=2, description="Grid size of the Kähler check")
    budget: int = Field(default=64, ge=1, description="Number of cutoffs in the completeness probe")
    h: Optional[float] = Field(default=None, gt=0, description="Finite-difference step; default scales with the point")

    # Sampling
    samples: int = Field(default=64, ge=1, description="Number of sample points")
    seed: int = Field(default=0, description="Seed of the point samplers")
    method: Literal["series", "closed-form"] = Field(default="closed-form", description="Kernel evaluation route")
    grid: int = Field(default=25, ge=1, description="Number of curvature grid points")
    at: Optional[Tuple[complex, ...]] = Field(default=None, description="Point coordinates z0,...,z_{n-1}")

    # Output
    out: str = Field(default="-", description="Report path; '-' writes to standard output")
    format: Optional[Literal["json", "csv"]] = Field(default=None, description="Report format; default per command")

    # Runtime
    threads: int = Field(default_factory=_env_threads, ge=1, description="Worker threads for sampling and scans")
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: Optional[str] = Field(default=None, description="Log file path")

    @field_validator("m_set", "t_grid", mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(item.strip() for item in value.split(",") if item.strip())
        return value

    @field_validator("at", mode="before")
    @classmethod
    def _parse_point(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = [item.strip() for item in value.split(",")]
        if value is None:
            return None
        try:
            return tuple(_coordinate(item) for item in value)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"cannot read point coordinates {value!r}: {exc}")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {value!r}")
        return level

    @model_validator(mode="after")
    def _scan_range(self) -> "RunConfig":
        if (self.m_from is None) != (self.m_to is None):
            raise ValueError("'m_from' and 'm_to' go together")
        return self

    class Config:
        """Pydantic configuration."""
        extra = "forbid"
        frozen = True


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error["loc"]) or "<root>"
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def load_config(path: str) -> RunConfig:
    """Read a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_describe(exc)}")


def merge_overrides(config: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """Return ``config`` with every non-None override applied and revalidated."""
    merged = config.model_dump()
    merged.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as exc:
        raise ConfigError(_describe(exc))
