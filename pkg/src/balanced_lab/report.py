"""Deterministic report writers.

JSON keys keep insertion order, floats carry 17 significant digits and
non-finite floats become the strings "inf", "-inf" and "nan", so two runs with
the same inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Sequence

import click
import numpy as np

from .epsilon import BalancedVerdict, EpsilonSample
from .profile import DomainPoint, HartogsProfile

SCHEMA = "balanced-lab/1"
CERTIFICATION = "numerical, non-certifying"
INDENT = "  "


def format_float(value: float) -> str:
    if math.isnan(value):
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    return f"{value:.17g}"


def _encode(value: Any, level: int) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, complex):
        return _encode([value.real, value.imag], level)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    pad = INDENT * (level + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + INDENT * level + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in value):
            return "[" + ", ".join(_encode(v, level) for v in value) + "]"
        items = [f"{pad}{_encode(v, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + INDENT * level + "]"
    raise TypeError(f"cannot encode {type(value).__name__} in a report")


def dumps(document: Dict[str, Any]) -> str:
    return _encode(document, 0) + "\n"


def new_report(command: str, profile: HartogsProfile, **fields: Any) -> Dict[str, Any]:
    document: Dict[str, Any] = {"schema": SCHEMA, "command": command, "profile": profile_fields(profile)}
    document.update(fields)
    return document


def profile_fields(profile: HartogsProfile) -> Dict[str, Any]:
    return {"name": profile.name, "source": profile.source.value, "x0": profile.x0}


def point_fields(p: DomainPoint) -> list:
    return [[c.real, c.imag] for c in p.coords]


def sample_fields(sample: EpsilonSample) -> Dict[str, Any]:
    return {
        "point": point_fields(sample.point),
        "x": sample.point.x,
        "w": sample.w,
        "epsilon": sample.epsilon,
        "error_budget": sample.error_budget,
    }


def verdict_fields(verdict: BalancedVerdict, with_samples: bool = True) -> Dict[str, Any]:
    fields: Dict[str, Any] = {
        "m": verdict.m,
        "verdict": verdict.verdict,
        "reason": verdict.reason,
        "relative_spread": verdict.relative_spread,
        "constant_estimate": verdict.constant_estimate,
        "method": verdict.method,
        "gamma": verdict.gamma,
    }
    if with_samples:
        fields["samples"] = [sample_fields(s) for s in verdict.samples]
    return fields


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(float(v)).strip('"') if isinstance(v, (float, np.floating)) else v for v in row])
    return buffer.getvalue()


def emit(text: str, out: str) -> None:
    """Write ``text`` to ``out``; "-" means standard output."""
    if out == "-":
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")
