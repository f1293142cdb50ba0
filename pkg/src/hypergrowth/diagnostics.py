"""Turning-point diagnostics.

Three lines of evidence are combined:

* monotonicity of the series along the arrow of time (sign test);
* a two-segment affine scan of the reciprocal series, where a genuine
  acceleration shows up as a downward break;
* an information-criterion contest between single-trend models (hyperbolic,
  exponential) and the piecewise exponential.

The verdict rule is a BIC-margin formalisation of a visual argument; the
rationale says so explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .errors import UnderdeterminedError, ValidationError
from .fitting import (FitConfig, FitResult, fit_exponential, fit_hyperbolic_stages,
                      fit_piecewise_exponential)
from .models import HyperbolicModel
from .timeseries import TimeSeries

# Residuals below this fraction of the data scale are treated as exact.
EXACT_FIT_RTOL = 1e-10

NO_TURNING_POINT = "NoTurningPoint"
TURNING_POINT = "TurningPoint"
INCONCLUSIVE = "Inconclusive"

SINGLE_TREND_KINDS = ("hyperbolic", "exponential")


def rss_floor(values) -> float:
    """Smallest RSS distinguishable from an exact fit for data `values`."""
    values = np.asarray(values, dtype=float)
    return values.size * (EXACT_FIT_RTOL * float(np.max(np.abs(values)))) ** 2


def information_criteria(rss: float, n: int, p: int, floor: float = 0.0) -> tuple[float, float]:
    """Gaussian-likelihood ``(AIC, BIC)`` from a residual sum of squares.

    ``AIC = n ln(rss/n) + 2p`` and ``BIC = n ln(rss/n) + p ln n``. `rss` is
    clamped at `floor` so that exact fits compare by their penalty terms
    instead of by round-off.
    """
    rss = max(rss, floor)
    if rss <= 0:
        raise ValidationError("information criteria need a positive RSS or floor")
    fit_term = n * math.log(rss / n)
    return fit_term + 2 * p, fit_term + p * math.log(n)


# -- monotonicity ----------------------------------------------------------

@dataclass(frozen=True)
class MonotonicityReport:
    """Direction of successive steps along the arrow of time.

    ``increasing_fraction`` is None when every step is a tie.
    """

    n_steps: int
    n_increasing: int
    increasing_fraction: float | None
    sign_test_p: float


def sign_test_p(k: int, n: int) -> float:
    """Two-sided binomial sign test against 1/2, by doubling the smaller tail."""
    if n == 0:
        return 1.0
    lower = binom.cdf(k, n, 0.5)
    upper = binom.sf(k - 1, n, 0.5)
    return float(min(1.0, 2.0 * min(lower, upper)))


def monotonicity_report(ts: TimeSeries) -> MonotonicityReport:
    """Count steps that rise toward the present; exact ties are dropped."""
    if len(ts) < 2:
        raise UnderdeterminedError("monotonicity needs at least 2 points")
    forward = ts.values[::-1]  # oldest first
    steps = np.diff(forward)
    n_up = int(np.sum(steps > 0))
    n = int(np.sum(steps != 0))
    return MonotonicityReport(n, n_up, n_up / n if n else None, sign_test_p(n_up, n))


# -- reciprocal break scan -------------------------------------------------

@dataclass(frozen=True)
class BreakScanReport:
    """Best single break of an affine trend in the reciprocal series.

    ``delta_bic`` is ``BIC(single) - BIC(two segments)``; positive favours
    the break. ``downward`` is True when, at the midpoint of the late segment
    (``t < best_breakpoint``), the late fit lies below the early segment's
    trend extended toward the present: the reciprocal drops faster than the
    past trend predicts, i.e. growth accelerated.
    """

    best_breakpoint: float
    delta_rss: float
    delta_bic: float
    downward: bool
    rss_single: float
    rss_two: float
    late_gap: float  # late fit minus early extrapolation at the late midpoint


def _affine(t, z):
    tm = t.mean()
    dt = t - tm
    sxx = dt @ dt
    slope = (dt @ (z - z.mean())) / sxx if sxx > 0 else 0.0
    icpt = z.mean() - slope * tm
    res = z - icpt - slope * t
    return icpt, slope, float(res @ res)


def reciprocal_break_scan(ts: TimeSeries, min_segment: int = 3) -> BreakScanReport:
    """Scan observed times for the best two-segment affine fit of ``1/value``.

    Candidate breakpoints follow :func:`fit_piecewise_exponential`; the
    break with the smallest total RSS wins, ties going to the smaller time.
    """
    if min_segment < 2:
        raise ValidationError("min_segment must be at least 2")
    n = len(ts)
    if n < 2 * min_segment:
        raise UnderdeterminedError(f"break scan needs at least {2 * min_segment} points, got {n}")
    s = float(ts.t.max()) or 1.0
    u = ts.t / s
    z = 1.0 / ts.values
    _, _, rss_single = _affine(u, z)
    tie = rss_floor(z)
    best = None
    for j in range(min_segment, n - min_segment + 1):
        late = _affine(u[:j], z[:j])
        early = _affine(u[j:], z[j:])
        total = late[2] + early[2]
        if best is None or total < best[0] - tie:
            best = (total, j, late, early)
    rss_two, j, late, early = best
    mid = 0.5 * (u[0] + u[j - 1])
    gap = (late[0] + late[1] * mid) - (early[0] + early[1] * mid)
    tol = EXACT_FIT_RTOL * float(np.max(np.abs(z)))
    floor = rss_floor(z)
    _, bic_single = information_criteria(rss_single, n, 2, floor)
    _, bic_two = information_criteria(rss_two, n, 5, floor)
    return BreakScanReport(
        best_breakpoint=float(ts.t[j]),
        delta_rss=max(rss_single - rss_two, 0.0),
        delta_bic=bic_single - bic_two,
        downward=bool(gap < -tol),
        rss_single=rss_single,
        rss_two=rss_two,
        late_gap=float(gap))


# -- model comparison ------------------------------------------------------

def model_label(fit: FitResult) -> str:
    m = fit.model
    if isinstance(m, HyperbolicModel):
        return f"hyperbolic_k{m.order}"
    return m.kind


@dataclass(frozen=True)
class ComparisonEntry:
    label: str
    kind: str
    rss_raw: float
    p: int
    aic: float
    bic: float
    exact_fit: bool = False


@dataclass(frozen=True)
class ModelComparison:
    entries: tuple[ComparisonEntry, ...]
    preferred: ComparisonEntry
    n: int
    warnings: tuple[str, ...] = ()

    def entry(self, label: str) -> ComparisonEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)


def compare_models(ts: TimeSeries, fits: list[FitResult]) -> ModelComparison:
    """Rank fits on the raw scale by BIC (AIC reported alongside).

    An RSS at or below the exact-fit floor is flagged with a warning; its
    criteria are computed at the floor, so a perfect fit still wins over
    any imperfect one and two perfect fits differ only by their penalties.
    Ties in BIC go to the model with fewer parameters.
    """
    if len(fits) < 2:
        raise ValidationError("compare_models needs at least two fits")
    n = len(ts)
    for f in fits:
        if f.n != n:
            raise ValidationError(f"fit {model_label(f)} was computed on {f.n} points, series has {n}")
    floor = rss_floor(ts.values)
    entries, warnings = [], []
    for f in fits:
        exact = f.rss_raw <= floor
        if exact:
            warnings.append(f"{model_label(f)}: residuals at round-off level; "
                            "criteria evaluated at the exact-fit floor")
        aic, bic = information_criteria(f.rss_raw, n, f.p, floor)
        entries.append(ComparisonEntry(model_label(f), f.model.kind, f.rss_raw, f.p, aic, bic, exact))
    preferred = min(entries, key=lambda e: (e.bic, e.p))
    return ModelComparison(tuple(entries), preferred, n, tuple(warnings))


# -- verdict ---------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    bic_margin: float = 10.0
    downward_required: bool = True

    def __post_init__(self):
        if not self.bic_margin >= 0:
            raise ValidationError("bic_margin must be non-negative")


@dataclass(frozen=True)
class Verdict:
    value: str
    rationale: str
    thresholds: Thresholds = field(default_factory=Thresholds)


def turning_point_verdict(cmp: ModelComparison, scan: BreakScanReport,
                          mono: MonotonicityReport | None = None,
                          thresholds: Thresholds | None = None) -> Verdict:
    """Decide whether the series shows a genuine turning point.

    TurningPoint when the piecewise exponential beats every single-trend
    model by more than ``bic_margin`` and (if required) the reciprocal scan
    shows a downward break; NoTurningPoint when some single-trend model beats
    the piecewise model by more than ``bic_margin``; otherwise Inconclusive.
    """
    th = thresholds or Thresholds()
    singles = [e for e in cmp.entries if e.kind in SINGLE_TREND_KINDS]
    pieces = [e for e in cmp.entries if e.kind == "piecewise_exponential"]
    if not singles or not pieces:
        raise ValidationError(
            "verdict needs a single-trend model (hyperbolic or exponential) and the piecewise model")
    pw = pieces[0]
    margins = {e.label: e.bic - pw.bic for e in singles}  # > 0 favours the break
    lines = [f"BIC({label}) - BIC({pw.label}) = {m:.3f}" for label, m in margins.items()]
    lines.append(f"reciprocal scan: best break at t = {scan.best_breakpoint:g} BP, "
                 f"delta_bic = {scan.delta_bic:.3f}, downward = {scan.downward}")
    if mono is not None and mono.increasing_fraction is not None:
        lines.append(f"monotonicity: {mono.n_increasing}/{mono.n_steps} steps rise toward the "
                     f"present (sign test p = {mono.sign_test_p:.3g})")
    if all(m > th.bic_margin for m in margins.values()):
        if scan.downward or not th.downward_required:
            value = TURNING_POINT
            why = f"piecewise exponential beats every single-trend model by more than {th.bic_margin:g}"
            if th.downward_required:
                why += " and the reciprocal view breaks downward"
        else:
            value = INCONCLUSIVE
            why = ("piecewise exponential wins on BIC but the reciprocal view shows no downward "
                   "break; treated as curvature misfit, not acceleration")
    elif any(-m > th.bic_margin for m in margins.values()):
        value = NO_TURNING_POINT
        winner = max(margins, key=lambda k: -margins[k])
        why = f"{winner} beats the piecewise exponential by {-margins[winner]:.3f} > {th.bic_margin:g}"
    else:
        value = INCONCLUSIVE
        why = f"no BIC difference exceeds the margin {th.bic_margin:g}"
    rationale = (f"{value}: {why}. " + "; ".join(lines)
                 + ". Decision rule: BIC-margin formalisation of the turning-point question.")
    return Verdict(value, rationale, th)


# -- full battery ----------------------------------------------------------

@dataclass(frozen=True)
class DiagnosticsReport:
    fits: tuple[FitResult, ...]  # every reported stage, comparison fits included
    comparison: ModelComparison
    monotonicity: MonotonicityReport
    break_scan: BreakScanReport
    verdict: Verdict

    @property
    def hyperbolic_fit(self) -> FitResult:
        return self.fits[-3]


def run_diagnostics(ts: TimeSeries, config: FitConfig | None = None,
                    thresholds: Thresholds | None = None,
                    min_segment: int = 3) -> DiagnosticsReport:
    """Fit the full model menu and run every diagnostic on `ts`.

    The comparison uses the final hyperbolic stage, the exponential and the
    piecewise exponential.
    """
    config = config or FitConfig()
    stages = fit_hyperbolic_stages(ts, config)
    expo = fit_exponential(ts)
    pw = fit_piecewise_exponential(ts, min_segment)
    cmp = compare_models(ts, [stages[-1], expo, pw])
    mono = monotonicity_report(ts)
    scan = reciprocal_break_scan(ts, min_segment)
    verdict = turning_point_verdict(cmp, scan, mono, thresholds)
    return DiagnosticsReport(tuple(stages) + (expo, pw), cmp, mono, scan, verdict)
