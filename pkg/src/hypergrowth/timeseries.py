"""Positive time series indexed in years before present (BP).

Larger ``t_bp`` lies further in the past; the arrow of time runs from large
``t_bp`` toward 0.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .errors import ParseError, ValidationError

HEADER = "t_bp,value"
_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

TransformKind = Literal["reciprocal", "log"]


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Ordered ``(t_bp, value)`` observations.

    Times are strictly ascending and every value is strictly positive, so the
    log and reciprocal views are always defined. Use :meth:`from_points` to
    build a series from unsorted input.
    """

    t: np.ndarray
    values: np.ndarray
    label: str = ""
    value_units: str = ""

    def __post_init__(self):
        t = _frozen(self.t)
        v = _frozen(self.values)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValidationError("t and values must be 1-d arrays of equal length")
        if t.size == 0:
            raise ValidationError("time series is empty")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValidationError("time series contains non-finite numbers")
        if np.any(t < 0):
            raise ValidationError(f"negative t_bp {t[t < 0][0]!r}")
        if np.any(v <= 0):
            raise ValidationError(f"non-positive value {v[v <= 0][0]!r}")
        if np.any(np.diff(t) <= 0):
            raise ValidationError("t_bp must be strictly ascending without duplicates")

    @classmethod
    def from_points(cls, points: Iterable[tuple[float, float]], label: str = "",
                    value_units: str = "") -> "TimeSeries":
        """Build a series from ``(t_bp, value)`` pairs in any order."""
        pts = sorted((float(t), float(v)) for t, v in points)
        for (t0, _), (t1, _) in zip(pts, pts[1:]):
            if t0 == t1:
                raise ValidationError(f"duplicate t_bp {t0!r}")
        if not pts:
            raise ValidationError("time series is empty")
        t, v = zip(*pts)
        return cls(np.array(t), np.array(v), label=label, value_units=value_units)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return self.t.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (np.array_equal(self.t, other.t)
                and np.array_equal(self.values, other.values)
                and self.label == other.label
                and self.value_units == other.value_units)

    __hash__ = None


def format_number(x: float) -> str:
    """Shortest round-trip decimal; integral values print without a fraction."""
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def parse_timeseries_csv(text: str, label: str = "", value_units: str = "") -> TimeSeries:
    """Parse ``t_bp,value`` CSV text into a validated :class:`TimeSeries`.

    The header row is optional. Lines starting with ``#`` and blank lines are
    skipped. Rows may appear in any order and are sorted by ``t_bp``.

    Raises
    ------
    ParseError
        Wrong column count or a field that is not a finite decimal number.
    ValidationError
        Duplicate ``t_bp``, negative ``t_bp``, non-positive value, or no rows.
    """
    if text.startswith("\ufeff"):
        text = text[1:]
    rows: list[tuple[float, float, int]] = []
    seen_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not seen_data and line == HEADER:
            seen_data = True
            continue
        seen_data = True
        fields = line.split(",")
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", lineno)
        nums = []
        for name, f in zip(("t_bp", "value"), fields):
            f = f.strip()
            if not _NUMBER.match(f):
                raise ParseError(f"non-numeric {name} {f!r}", lineno)
            x = float(f)
            if not math.isfinite(x):
                raise ParseError(f"non-finite {name} {f!r}", lineno)
            nums.append(x)
        t, v = nums
        if t < 0:
            raise ValidationError(f"negative t_bp, line {lineno}")
        if v <= 0:
            raise ValidationError(f"non-positive value, line {lineno}")
        rows.append((t, v, lineno))
    if not rows:
        raise ValidationError("no data rows")
    rows.sort(key=lambda r: r[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise ValidationError(f"duplicate t_bp {format_number(a[0])}, line {max(a[2], b[2])}")
    return TimeSeries(np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
                      label=label, value_units=value_units)


def to_csv(ts: TimeSeries) -> str:
    lines = [HEADER]
    lines.extend(f"{format_number(t)},{format_number(v)}" for t, v in zip(ts.t, ts.values))
    return "\n".join(lines) + "\n"


def transform_series(ts: TimeSeries, kind: TransformKind) -> TimeSeries:
    """Return the reciprocal (``1/value``) or natural-log view of `ts`.

    Times are untouched and the label gains the transform name. Logs of
    values below 1 are negative, so the result is a :class:`TransformedSeries`
    whose values need only be finite.
    """
    if kind == "reciprocal":
        values = 1.0 / ts.values
    elif kind == "log":
        values = np.log(ts.values)
    else:
        raise ValidationError(f"unknown transform {kind!r}")
    label = f"{ts.label} ({kind})" if ts.label else kind
    return TransformedSeries(ts.t, values, label=label, value_units=ts.value_units)


@dataclass(frozen=True, eq=False)
class TransformedSeries(TimeSeries):
    """A transformed view; values need only be finite (logs may be <= 0)."""

    def __post_init__(self):
        t = _frozen(self.t)
        v = _frozen(self.values)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if t.shape != v.shape or t.size == 0:
            raise ValidationError("transformed series must be non-empty and aligned")
        if not np.all(np.isfinite(v)):
            raise ValidationError("transformed series contains non-finite numbers")
