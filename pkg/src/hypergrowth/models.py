"""Growth-model family: hyperbolic of order k, exponential, piecewise exponential.

All models are written in years before present, so growth toward the
present means the value rises as ``t`` falls::

    hyperbolic     N(t) = 1 / (a0 + a1 t + ... + ak t^k)
    exponential    N(t) = C exp(-r t)
    piecewise      late (t < tb): C_l exp(-r_l t); early (t >= tb): C_e exp(-r_e t)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .errors import SingularityError, ValidationError

DEFAULT_DOMAIN = (0.0, 10000.0)
MAX_ORDER = 3


@dataclass(frozen=True)
class HyperbolicModel:
    """Reciprocal-polynomial model ``N(t) = 1 / D(t)``.

    Parameters
    ----------
    coefficients
        ``a0, a1, ..., ak`` (constant term first).
    domain
        Closed interval ``(t_min, t_max)`` in years BP on which the model is
        declared valid.
    """

    coefficients: tuple[float, ...]
    domain: tuple[float, float] = DEFAULT_DOMAIN

    kind = "hyperbolic"

    def __post_init__(self):
        coef = tuple(float(a) for a in self.coefficients)
        dom = tuple(float(x) for x in self.domain)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "domain", dom)
        if not 1 <= len(coef) - 1 <= MAX_ORDER:
            raise ValidationError(f"hyperbolic order must be 1..{MAX_ORDER}, got {len(coef) - 1}")
        if not all(math.isfinite(a) for a in coef):
            raise ValidationError("hyperbolic coefficients must be finite")
        if len(dom) != 2 or not all(math.isfinite(x) for x in dom) or dom[0] > dom[1]:
            raise ValidationError(f"invalid domain {self.domain!r}")

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    @property
    def n_params(self) -> int:
        return len(self.coefficients)

    def denominator(self, t):
        """``D(t)`` by Horner's rule."""
        t = np.asarray(t, dtype=float)
        d = np.zeros_like(t)
        for a in reversed(self.coefficients):
            d = d * t + a
        return d

    def denominator_slope(self, t):
        """``dD/dt``."""
        t = np.asarray(t, dtype=float)
        d = np.zeros_like(t)
        for i in range(self.order, 0, -1):
            d = d * t + i * self.coefficients[i]
        return d


@dataclass(frozen=True)
class ExponentialModel:
    """``N(t) = amplitude * exp(-rate * t)``; ``rate > 0`` grows toward the present."""

    amplitude: float
    rate: float

    kind = "exponential"
    n_params = 2

    def __post_init__(self):
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "rate", float(self.rate))
        if not (self.amplitude > 0 and math.isfinite(self.amplitude)):
            raise ValidationError(f"amplitude must be positive and finite, got {self.amplitude!r}")
        if not math.isfinite(self.rate):
            raise ValidationError("rate must be finite")


@dataclass(frozen=True)
class PiecewiseExponentialModel:
    """Two exponential regimes joined at `breakpoint`, without continuity.

    `late` applies for ``t < breakpoint`` (closer to the present), `early`
    for ``t >= breakpoint``.
    """

    breakpoint: float
    early: ExponentialModel
    late: ExponentialModel

    kind = "piecewise_exponential"
    n_params = 5

    def __post_init__(self):
        object.__setattr__(self, "breakpoint", float(self.breakpoint))
        if not math.isfinite(self.breakpoint):
            raise ValidationError("breakpoint must be finite")


GrowthModel = Union[HyperbolicModel, ExponentialModel, PiecewiseExponentialModel]


@dataclass(frozen=True)
class DomainVerdict:
    """Outcome of :func:`validate_model_domain`.

    ``first_offending_t`` is the smallest ``t`` in the domain where
    ``D(t) <= 0``, or None when the model is valid.
    """

    first_offending_t: float | None = None

    @property
    def valid(self) -> bool:
        return self.first_offending_t is None

    def __bool__(self) -> bool:
        return self.valid


def _check_in_domain(m: HyperbolicModel, t: np.ndarray) -> None:
    lo, hi = m.domain
    # Allow a sliver of round-off at the edges (e.g. grids built by arange).
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    if np.any(t < lo - slack) or np.any(t > hi + slack):
        bad = t[(t < lo - slack) | (t > hi + slack)][0]
        raise ValidationError(f"t = {bad!r} outside model domain [{lo!r}, {hi!r}]")


def eval_model(m: GrowthModel, t):
    """Evaluate ``N(t)``; scalar in, float out, array in, array out.

    Raises
    ------
    ValidationError
        `t` outside a hyperbolic model's domain.
    SingularityError
        Hyperbolic denominator ``D(t) <= 0`` at a requested time.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(m, HyperbolicModel):
        _check_in_domain(m, tt)
        d = m.denominator(tt)
        if np.any(~(d > 0)):
            bad = tt[~(d > 0)][0]
            raise SingularityError(f"hyperbolic denominator is non-positive at t = {bad!r}")
        out = 1.0 / d
    elif isinstance(m, ExponentialModel):
        out = m.amplitude * np.exp(-m.rate * tt)
    elif isinstance(m, PiecewiseExponentialModel):
        late = tt < m.breakpoint
        out = np.where(late,
                       m.late.amplitude * np.exp(-m.late.rate * tt),
                       m.early.amplitude * np.exp(-m.early.rate * tt))
    else:
        raise TypeError(f"not a growth model: {m!r}")
    return float(out[0]) if scalar else out


def relative_growth_rate(m: GrowthModel, t):
    """Instantaneous growth rate along the arrow of time, ``-(dN/dt) / N``.

    For hyperbolic models this is ``D'(t) / D(t)``; for exponential models it
    is the constant rate.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if isinstance(m, HyperbolicModel):
        eval_model(m, tt)  # domain and singularity checks
        out = m.denominator_slope(tt) / m.denominator(tt)
    elif isinstance(m, ExponentialModel):
        out = np.full_like(tt, m.rate)
    elif isinstance(m, PiecewiseExponentialModel):
        out = np.where(tt < m.breakpoint, m.late.rate, m.early.rate)
    else:
        raise TypeError(f"not a growth model: {m!r}")
    return float(out[0]) if scalar else out


def _first_zero_quadratic(c0, c1, c2, lo, hi):
    """Smallest u in [lo, hi] with c0 + c1 u + c2 u^2 <= 0, given D(lo) > 0."""
    if c2 == 0.0:
        return _first_zero_linear(c0, c1, lo, hi)
    disc = c1 * c1 - 4.0 * c2 * c0
    vertex = -c1 / (2.0 * c2)
    if disc < 0.0:
        # Round-off can hide a tangential root; trust the vertex value instead.
        if c2 > 0 and lo <= vertex <= hi and c0 + vertex * (c1 + vertex * c2) <= 0.0:
            return vertex
        return None
    # Numerically stable pair of roots.
    q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
    roots = []
    if q != 0.0:
        roots.append(q / c2)
        roots.append(c0 / q)
    else:
        roots.append(vertex)
    inside = sorted(r for r in roots if lo <= r <= hi)
    return inside[0] if inside else None


def _first_zero_linear(c0, c1, lo, hi):
    if c1 == 0.0:
        return None if c0 > 0 else lo
    root = -c0 / c1
    return root if lo <= root <= hi else None


def _first_zero_isolated(coef, lo, hi):
    """Root isolation: split at critical points, then bracket on monotone pieces."""
    poly = np.polynomial.Polynomial(coef)
    crit = [float(r.real) for r in poly.deriv().roots()
            if abs(r.imag) <= 1e-12 * max(1.0, abs(r.real)) and lo < r.real < hi]
    knots = [lo] + sorted(crit) + [hi]
    for a, b in zip(knots, knots[1:]):
        fa, fb = poly(a), poly(b)
        if fa <= 0:
            return a
        if fb <= 0:
            return b if fb == 0 else brentq(poly, a, b, xtol=1e-15, rtol=1e-15)
    return None


def validate_model_domain(m: HyperbolicModel) -> DomainVerdict:
    """Check that ``D(t) > 0`` on the whole domain of `m`.

    Order 2 uses closed-form quadratic roots; orders 1 and 3 isolate the real
    roots between critical points. The polynomial is analysed in rescaled time
    ``u = t / max|t|`` so that coefficient magnitudes stay comparable.
    """
    lo, hi = m.domain
    scale = max(abs(lo), abs(hi)) or 1.0
    c = [a * scale ** i for i, a in enumerate(m.coefficients)]
    ulo, uhi = lo / scale, hi / scale
    if m.denominator(lo) <= 0:
        return DomainVerdict(lo)
    if m.order == 2:
        u = _first_zero_quadratic(c[0], c[1], c[2], ulo, uhi)
    elif m.order == 1:
        u = _first_zero_linear(c[0], c[1], ulo, uhi)
    else:
        u = _first_zero_isolated(c, ulo, uhi)
    return DomainVerdict(None if u is None else u * scale)


# -- serialization ---------------------------------------------------------

def model_to_dict(m: GrowthModel) -> dict:
    if isinstance(m, HyperbolicModel):
        return {"kind": m.kind, "order": m.order, "coefficients": list(m.coefficients),
                "domain": list(m.domain)}
    if isinstance(m, ExponentialModel):
        return {"kind": m.kind, "amplitude": m.amplitude, "rate": m.rate}
    if isinstance(m, PiecewiseExponentialModel):
        return {"kind": m.kind, "breakpoint": m.breakpoint,
                "early": {"amplitude": m.early.amplitude, "rate": m.early.rate},
                "late": {"amplitude": m.late.amplitude, "rate": m.late.rate}}
    raise TypeError(f"not a growth model: {m!r}")


def model_from_dict(d: dict) -> GrowthModel:
    """Inverse of :func:`model_to_dict`; a missing hyperbolic domain defaults to [0, 10000]."""
    try:
        kind = d["kind"]
        if kind == "hyperbolic":
            coef = d["coefficients"]
            if "order" in d and int(d["order"]) != len(coef) - 1:
                raise ValidationError("order does not match the number of coefficients")
            return HyperbolicModel(tuple(coef), tuple(d.get("domain", DEFAULT_DOMAIN)))
        if kind == "exponential":
            return ExponentialModel(d["amplitude"], d["rate"])
        if kind == "piecewise_exponential":
            return PiecewiseExponentialModel(
                d["breakpoint"],
                early=ExponentialModel(d["early"]["amplitude"], d["early"]["rate"]),
                late=ExponentialModel(d["late"]["amplitude"], d["late"]["rate"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed model description: {exc!r}") from exc
    raise ValidationError(f"unknown model kind {kind!r}")
