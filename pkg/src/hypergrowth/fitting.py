"""Parameter estimation for the growth-model family.

Hyperbolic fits run in two stages by default: ordinary least squares of
``1/value`` on ``{1, t, ..., t^k}`` (exact for noiseless data and always
well-posed), then Levenberg-Marquardt refinement of the raw-scale residuals
``value - N(t)``. Exponential fits use log-linear OLS as the starting point
and the same raw-scale refinement, so every model reaches the comparison
stage at its raw-scale least-squares optimum.

Time is internally rescaled to ``u = t / max|t|`` before any solve; with
``t`` up to 1e4 the raw design matrix would have columns spanning 1 to 1e12
for a cubic.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Literal

import numpy as np

from .errors import (BootstrapUnstableError, NumericalError, PositivityError,
                     UnderdeterminedError, ValidationError)
from .models import (ExponentialModel, GrowthModel, HyperbolicModel, MAX_ORDER,
                     PiecewiseExponentialModel, eval_model, validate_model_domain)
from .timeseries import TimeSeries

Method = Literal["reciprocal_ols", "nls", "reciprocal_then_nls"]
METHODS = ("reciprocal_ols", "nls", "reciprocal_then_nls")

# LM damping schedule
_LAMBDA0 = 1e-3
_LAMBDA_UP = 10.0
_LAMBDA_DOWN = 10.0
_LAMBDA_MAX = 1e16


@dataclass(frozen=True)
class FitConfig:
    method: Method = "reciprocal_then_nls"
    order: int = 2
    max_nls_iterations: int = 100
    nls_tolerance: float = 1e-10
    time_rescale: Literal["auto", "off"] = "auto"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"unknown fit method {self.method!r}")
        if not 1 <= self.order <= MAX_ORDER:
            raise ValidationError(f"order must be 1..{MAX_ORDER}, got {self.order}")
        if self.max_nls_iterations < 1:
            raise ValidationError("max_nls_iterations must be >= 1")
        if not self.nls_tolerance > 0:
            raise ValidationError("nls_tolerance must be positive")
        if self.time_rescale not in ("auto", "off"):
            raise ValidationError(f"time_rescale must be 'auto' or 'off', got {self.time_rescale!r}")


@dataclass(frozen=True)
class FitResult:
    """A fitted model with residual sums of squares on three scales.

    ``p`` counts free parameters: ``k + 1`` for hyperbolic, 2 for
    exponential and 5 for piecewise exponential (breakpoint included).
    ``stage`` names the estimator that produced the model.
    """

    model: GrowthModel
    rss_raw: float
    rss_reciprocal: float
    rss_log: float
    n: int
    p: int
    config: FitConfig | None = None
    converged: bool = True
    iterations: int = 0
    stage: str = ""
    note: str = ""


def residual_sums(model: GrowthModel, t, y) -> tuple[float, float, float]:
    """``(rss_raw, rss_reciprocal, rss_log)`` of `model` against data."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    m = eval_model(model, t)
    return (float(np.sum((y - m) ** 2)),
            float(np.sum((1.0 / y - 1.0 / m) ** 2)),
            float(np.sum((np.log(y) - np.log(m)) ** 2)))


def _make_result(model, t, y, p, **kw) -> FitResult:
    raw, rec, lg = residual_sums(model, t, y)
    return FitResult(model, raw, rec, lg, n=len(t), p=p, **kw)


def _time_scale(t, rescale=True) -> float:
    if not rescale:
        return 1.0
    s = float(np.max(np.abs(t)))
    return s if s > 0 else 1.0


def _check_hyperbolic_data(t, order):
    n_distinct = np.unique(t).size
    if n_distinct < order + 2:
        raise UnderdeterminedError(
            f"order-{order} hyperbolic fit needs at least {order + 2} distinct times, got {n_distinct}")


# -- Levenberg-Marquardt ---------------------------------------------------

@dataclass
class _LMOutcome:
    params: np.ndarray
    rss: float
    iterations: int
    converged: bool
    blocked: bool = False  # last rejection came from the feasibility test


def levenberg_marquardt(residual: Callable[[np.ndarray], np.ndarray],
                        jacobian: Callable[[np.ndarray], np.ndarray],
                        p0, max_iterations: int = 100, tolerance: float = 1e-10,
                        feasible: Callable[[np.ndarray], bool] | None = None) -> _LMOutcome:
    """Minimise ``sum(residual(p)**2)`` from `p0`.

    `jacobian` returns ``d residual / d p``. Marquardt's diagonal scaling is
    used; damping starts at 1e-3 and is multiplied by 10 on a rejected step
    and divided by 10 on an accepted one. A step is accepted only if it
    lowers the objective and passes `feasible`. Iteration stops once the
    proposed step changes the parameters by less than `tolerance` relative
    to their norm. Only accepted steps move the iterate, so the objective
    never increases.
    """
    p = np.array(p0, dtype=float)
    r = residual(p)
    rss = float(r @ r)
    lam = _LAMBDA0
    blocked = False
    J = jacobian(p)
    for it in range(1, max_iterations + 1):
        diag = np.sum(J * J, axis=0)
        diag = np.where(diag > 0, diag, 1.0)
        A = np.vstack([J, np.diag(np.sqrt(lam * diag))])
        b = np.concatenate([-r, np.zeros(p.size)])
        step = np.linalg.lstsq(A, b, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            return _LMOutcome(p, rss, it, False, blocked)
        small = np.linalg.norm(step) <= tolerance * (np.linalg.norm(p) + tolerance)
        trial = p + step
        ok = feasible is None or feasible(trial)
        r_new = residual(trial) if ok else None
        rss_new = float(r_new @ r_new) if ok else math.inf
        if ok and rss_new < rss:
            p, r, rss = trial, r_new, rss_new
            J = jacobian(p)
            lam = max(lam / _LAMBDA_DOWN, 1e-300)
            blocked = False
        else:
            blocked = not ok
            lam *= _LAMBDA_UP
        if small:
            return _LMOutcome(p, rss, it, True, blocked)
        if lam > _LAMBDA_MAX:
            # No descent direction left at working precision.
            return _LMOutcome(p, rss, it, not blocked, blocked)
    return _LMOutcome(p, rss, max_iterations, False, blocked)


# -- hyperbolic ------------------------------------------------------------

def _reciprocal_ols_coefficients(t, y, order, rescale=True) -> np.ndarray:
    s = _time_scale(t, rescale)
    u = np.asarray(t, dtype=float) / s
    X = np.vander(u, order + 1, increasing=True)
    beta, _, rank, _ = np.linalg.lstsq(X, 1.0 / np.asarray(y, dtype=float), rcond=None)
    if rank < order + 1:
        raise UnderdeterminedError("rank-deficient design: time grid is degenerate")
    return beta / s ** np.arange(order + 1)


def fit_reciprocal_polynomial(ts: TimeSeries, order: int = 2,
                              time_rescale: Literal["auto", "off"] = "auto") -> FitResult:
    """Least squares of ``1/value`` on ``{1, t, ..., t^order}``.

    The returned model's domain is the data time range.

    Raises
    ------
    UnderdeterminedError
        Fewer than ``order + 2`` points.
    PositivityError
        The fitted denominator is not positive on the data range.
    """
    config = FitConfig(method="reciprocal_ols", order=order, time_rescale=time_rescale)
    return _fit_reciprocal_arrays(ts.t, ts.values, config)


def _fit_reciprocal_arrays(t, y, config: FitConfig) -> FitResult:
    t = np.asarray(t, dtype=float)
    _check_hyperbolic_data(t, config.order)
    coef = _reciprocal_ols_coefficients(t, y, config.order, config.time_rescale == "auto")
    model = HyperbolicModel(tuple(coef), (float(t.min()), float(t.max())))
    verdict = validate_model_domain(model)
    if not verdict.valid:
        raise PositivityError(
            f"fitted denominator is non-positive at t = {verdict.first_offending_t!r}")
    return _make_result(model, t, y, model.n_params, config=config, stage="reciprocal_ols")


def refine_nls(ts: TimeSeries, init: HyperbolicModel, config: FitConfig | None = None) -> FitResult:
    """Raw-scale Levenberg-Marquardt refinement of a hyperbolic model.

    Minimises ``sum((value - N(t))**2)`` over the coefficients, starting from
    `init`. Never raises on a stalled descent: the best parameters seen are
    returned with ``converged=False`` and an explanatory note.
    """
    if config is None:
        config = FitConfig(order=init.order)
    elif config.order != init.order:
        config = replace(config, order=init.order)
    return _refine_nls_arrays(ts.t, ts.values, init, config)


def _refine_nls_arrays(t, y, init: HyperbolicModel, config: FitConfig) -> FitResult:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    domain = (float(t.min()), float(t.max()))
    start = HyperbolicModel(init.coefficients, domain)
    if not validate_model_domain(start).valid:
        raise ValidationError("initial model is not positive on the data time range")
    s = _time_scale(t, config.time_rescale == "auto")
    u = t / s
    powers = np.arange(init.order + 1)
    scale = s ** powers
    V = np.vander(u, init.order + 1, increasing=True)

    def residual(b):
        return y - 1.0 / (V @ b)

    def jacobian(b):
        n = 1.0 / (V @ b)
        return V * (n * n)[:, None]  # d(y - 1/D)/db = V / D^2

    def feasible(b):
        if b[0] > 0 and np.all(b >= 0) and domain[0] >= 0:
            return True  # every term non-negative on t >= 0
        return validate_model_domain(HyperbolicModel(tuple(b / scale), domain)).valid

    b0 = np.array(init.coefficients) * scale
    out = levenberg_marquardt(residual, jacobian, b0, config.max_nls_iterations,
                              config.nls_tolerance, feasible)
    note = ""
    if not out.converged:
        note = ("positivity constraint blocked the descent" if out.blocked
                else "iteration cap reached")
    model = HyperbolicModel(tuple(out.params / scale), domain)
    return _make_result(model, t, y, model.n_params, config=config, converged=out.converged,
                        iterations=out.iterations, stage="nls", note=note)


def fit_hyperbolic_stages(ts: TimeSeries, config: FitConfig | None = None) -> list[FitResult]:
    """Run the configured hyperbolic pipeline and return every reported stage.

    ``reciprocal_ols`` yields one result; ``nls`` yields only the refined
    result (initialised by reciprocal OLS); ``reciprocal_then_nls`` yields
    both, initializer first.
    """
    config = config or FitConfig()
    return _hyperbolic_stages_arrays(ts.t, ts.values, config)


def _hyperbolic_stages_arrays(t, y, config: FitConfig) -> list[FitResult]:
    ols = _fit_reciprocal_arrays(t, y, replace(config, method="reciprocal_ols"))
    if config.method == "reciprocal_ols":
        return [ols]
    nls = _refine_nls_arrays(t, y, ols.model, config)
    return [nls] if config.method == "nls" else [ols, nls]


def fit_hyperbolic(ts: TimeSeries, config: FitConfig | None = None) -> FitResult:
    """Final hyperbolic fit of the configured pipeline."""
    return fit_hyperbolic_stages(ts, config)[-1]


# -- exponential -----------------------------------------------------------

def _loglinear(u, z):
    """OLS of z on {1, u}: returns (intercept, slope). Requires >= 2 distinct u."""
    um = u.mean()
    du = u - um
    sxx = du @ du
    slope = (du @ (z - z.mean())) / sxx if sxx > 0 else 0.0
    return z.mean() - slope * um, slope


def _refine_exponential(u, y, c, rho, max_iterations=100, tolerance=1e-10):
    """Raw-scale LM for ``y ~ exp(c - rho*u)`` in ``(c, rho)``.

    Same damping schedule and stopping rule as :func:`levenberg_marquardt`,
    specialised to two parameters: this runs once per segment per candidate
    breakpoint, so the 2x2 normal equations are solved in closed form.
    """
    c, rho = float(c), float(rho)
    m = np.exp(c - rho * u)
    r = y - m
    rss = float(r @ r)
    lam = _LAMBDA0
    um = u * m
    # Jacobian columns of the residual are (-m, u*m).
    a11, a12, a22 = float(m @ m), -float(m @ um), float(um @ um)
    g1, g2 = -float(m @ r), float(um @ r)
    for it in range(1, max_iterations + 1):
        d1 = a11 * (1.0 + lam) if a11 > 0 else lam
        d2 = a22 * (1.0 + lam) if a22 > 0 else lam
        det = d1 * d2 - a12 * a12
        if not det > 0 or not math.isfinite(det):
            return _LMOutcome(np.array([c, rho]), rss, it, False)
        s1 = (-g1 * d2 + g2 * a12) / det
        s2 = (-g2 * d1 + g1 * a12) / det
        small = math.hypot(s1, s2) <= tolerance * (math.hypot(c, rho) + tolerance)
        cn, rn = c + s1, rho + s2
        mn = np.exp(cn - rn * u)
        rr = y - mn
        rss_new = float(rr @ rr)
        if rss_new < rss:
            c, rho, m, r, rss = cn, rn, mn, rr, rss_new
            um = u * m
            a11, a12, a22 = float(m @ m), -float(m @ um), float(um @ um)
            g1, g2 = -float(m @ r), float(um @ r)
            lam = max(lam / _LAMBDA_DOWN, 1e-300)
        else:
            lam *= _LAMBDA_UP
        if small:
            return _LMOutcome(np.array([c, rho]), rss, it, True)
        if lam > _LAMBDA_MAX:
            return _LMOutcome(np.array([c, rho]), rss, it, True)
    return _LMOutcome(np.array([c, rho]), rss, max_iterations, False)


def _fit_exponential_arrays(t, y, s=None):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    s = _time_scale(t) if s is None else s
    u = t / s
    c, slope = _loglinear(u, np.log(y))
    out = _refine_exponential(u, y, c, -slope)
    c, rho = out.params
    return ExponentialModel(math.exp(c), rho / s), out


def fit_exponential(ts: TimeSeries) -> FitResult:
    """Fit ``C exp(-r t)`` by log-linear OLS followed by raw-scale refinement.

    Raises
    ------
    UnderdeterminedError
        Fewer than 3 points.
    """
    if len(ts) < 3:
        raise UnderdeterminedError(f"exponential fit needs at least 3 points, got {len(ts)}")
    model, out = _fit_exponential_arrays(ts.t, ts.values)
    return _make_result(model, ts.t, ts.values, 2, converged=out.converged,
                        iterations=out.iterations, stage="exponential")


def _prefix_loglinear(u, z):
    """Log-linear OLS intercept/slope for every prefix u[:j] (j >= 2)."""
    n = u.size
    j = np.arange(1, n + 1, dtype=float)
    su, sz = np.cumsum(u), np.cumsum(z)
    suu, suz = np.cumsum(u * u), np.cumsum(u * z)
    sxx = suu - su * su / j
    sxy = suz - su * sz / j
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(sxx > 1e-14 * np.maximum(suu, 1e-300), sxy / sxx, 0.0)
    return (sz - slope * su) / j, slope


def fit_piecewise_exponential(ts: TimeSeries, min_segment: int = 3) -> FitResult:
    """Two independent exponential segments split at an observed time.

    Every observed ``t_b`` leaving at least `min_segment` points strictly
    before it (late segment, ``t < t_b``) and at or after it (early segment)
    is tried. Each segment is fitted on the raw scale, starting from the
    better of its own log-linear fit and the global exponential fit; the
    latter makes the single exponential exactly nested, so the returned RSS
    never exceeds the single-exponential RSS. The breakpoint with the smallest
    total raw RSS wins; ties go to the smaller ``t_b``.
    """
    if min_segment < 2:
        raise ValidationError("min_segment must be at least 2")
    n = len(ts)
    if n < 2 * min_segment:
        raise UnderdeterminedError(
            f"piecewise fit needs at least {2 * min_segment} points, got {n}")
    t, y = ts.t, ts.values
    s = _time_scale(t)
    u = t / s
    z = np.log(y)
    glob, _ = _fit_exponential_arrays(t, y, s)
    g = np.array([math.log(glob.amplitude), glob.rate * s])

    a_late, b_late = _prefix_loglinear(u, z)
    a_early, b_early = _prefix_loglinear(u[::-1], z[::-1])
    a_early, b_early = a_early[::-1], b_early[::-1]  # index j: fit of u[j:]

    def seg_fit(us, ys, init):
        cand = [init, g]
        rss0 = [float(np.sum((ys - np.exp(c - r * us)) ** 2)) for c, r in cand]
        c, r = cand[int(np.argmin(rss0))]
        out = _refine_exponential(us, ys, c, r)
        return out

    # RSS differences below round-off of an exact fit count as ties.
    tie = n * (1e-10 * float(np.max(y))) ** 2
    best = None
    for j in range(min_segment, n - min_segment + 1):
        late = seg_fit(u[:j], y[:j], (a_late[j - 1], -b_late[j - 1]))
        early = seg_fit(u[j:], y[j:], (a_early[j], -b_early[j]))
        total = late.rss + early.rss
        if best is None or total < best[0] - tie:
            best = (total, j, late, early)
    _, j, late, early = best
    model = PiecewiseExponentialModel(
        t[j],
        early=ExponentialModel(math.exp(early.params[0]), early.params[1] / s),
        late=ExponentialModel(math.exp(late.params[0]), late.params[1] / s))
    return _make_result(model, t, y, 5, converged=late.converged and early.converged,
                        iterations=late.iterations + early.iterations,
                        stage="piecewise_exponential")


# -- bootstrap -------------------------------------------------------------

@dataclass(frozen=True)
class BootstrapResult:
    """Percentile intervals (2.5%, 97.5%) for hyperbolic coefficients a0..ak."""

    estimate: tuple[float, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    n_resamples: int
    n_skipped: int
    samples: np.ndarray = field(repr=False, compare=False, default=None)

    def covers(self, coefficients) -> tuple[bool, ...]:
        return tuple(lo <= c <= hi for lo, c, hi in zip(self.lower, coefficients, self.upper))


_MAX_REDRAWS = 10
_MAX_SKIP_FRACTION = 0.2


def resample_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for resample `index`; a pure function of ``(seed, index)``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(index),)))


def _one_resample(t, y, config: FitConfig, seed: int, index: int):
    rng = resample_rng(seed, index)
    n = t.size
    for _ in range(_MAX_REDRAWS):
        idx = rng.integers(0, n, size=n)
        if np.unique(t[idx]).size >= config.order + 2:
            break
    else:
        return None
    order = np.argsort(t[idx], kind="stable")
    idx = idx[order]
    try:
        fit = _hyperbolic_stages_arrays(t[idx], y[idx], config)[-1]
    except NumericalError:
        return None
    return fit.model.coefficients


def bootstrap_parameters(ts: TimeSeries, config: FitConfig | None = None,
                         n_resamples: int = 1000, seed: int = 0,
                         n_jobs: int = 1) -> BootstrapResult:
    """Case-resampling bootstrap of the hyperbolic coefficients.

    Each resample draws points with replacement using a generator derived
    from ``(seed, resample index)``, so the result does not depend on
    `n_jobs`. A draw with fewer than ``order + 2`` distinct times is redrawn
    up to 10 times; after that, or when the refit fails, the resample is
    skipped.

    Raises
    ------
    ValidationError
        `n_resamples` below 100.
    BootstrapUnstableError
        More than 20% of resamples skipped.
    """
    config = config or FitConfig()
    if n_resamples < 100:
        raise ValidationError(f"n_resamples must be >= 100, got {n_resamples}")
    if not 0 <= int(seed) < 2 ** 64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    estimate = fit_hyperbolic(ts, config).model.coefficients
    t, y = np.asarray(ts.t), np.asarray(ts.values)

    def work(i):
        return _one_resample(t, y, config, seed, i)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            draws = list(pool.map(work, range(n_resamples)))
    else:
        draws = [work(i) for i in range(n_resamples)]
    kept = [d for d in draws if d is not None]
    skipped = n_resamples - len(kept)
    if skipped > _MAX_SKIP_FRACTION * n_resamples:
        raise BootstrapUnstableError(f"{skipped} of {n_resamples} resamples skipped")
    samples = np.array(kept)
    lower = np.percentile(samples, 2.5, axis=0)
    upper = np.percentile(samples, 97.5, axis=0)
    return BootstrapResult(tuple(estimate), tuple(lower.tolist()), tuple(upper.tolist()),
                           n_resamples, skipped, samples)
