"""Synthetic series and the Monte Carlo turning-point experiment.

Per-trial seeds come from SplitMix64: trial ``i`` (0-based) uses the
``(i+1)``-th output of a SplitMix64 stream seeded with the master seed, i.e.
``splitmix64((master_seed + i * 0x9E3779B97F4A7C15) mod 2**64)`` with the
standard finaliser (shifts 30/27/31, multipliers 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB). Each trial seed then drives a NumPy ``default_rng``
(PCG64). Trial outcomes therefore depend only on ``(master_seed, i)``:
adding trials never changes earlier ones, and thread count is irrelevant.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .diagnostics import (TURNING_POINT, Thresholds, compare_models, monotonicity_report,
                          reciprocal_break_scan, turning_point_verdict)
from .errors import HypergrowthError, NumericalError, ValidationError
from .fitting import FitConfig, fit_exponential, fit_hyperbolic, fit_piecewise_exponential
from .models import GrowthModel, HyperbolicModel, eval_model, model_to_dict
from .timeseries import TimeSeries, format_number

NoiseKind = Literal["none", "multiplicative_lognormal", "additive_gaussian"]

_MASK64 = (1 << 64) - 1
_GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MAX_GAUSSIAN_REDRAWS = 100


@dataclass(frozen=True)
class NoiseSpec:
    kind: NoiseKind = "multiplicative_lognormal"
    sigma: float = 0.05

    def __post_init__(self):
        if self.kind not in ("none", "multiplicative_lognormal", "additive_gaussian"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if not self.sigma >= 0:
            raise ValidationError("noise sigma must be non-negative")


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trial_seed(master_seed: int, index: int) -> int:
    return splitmix64((master_seed + index * _GOLDEN_GAMMA) & _MASK64)


def _check_seed(seed):
    if not 0 <= int(seed) <= _MASK64:
        raise ValidationError("seed must be a 64-bit unsigned integer")


def sample_series(m: GrowthModel, grid: Sequence[float], noise: NoiseSpec | None = None,
                  seed: int = 0, label: str = "synthetic") -> TimeSeries:
    """Evaluate `m` on `grid` and apply seeded noise.

    Lognormal noise multiplies by ``exp(sigma * z)``. Gaussian noise adds
    ``sigma * z`` and redraws any non-positive value, up to 100 times per
    point.
    """
    noise = noise or NoiseSpec("none", 0.0)
    _check_seed(seed)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be a non-empty strictly ascending sequence")
    clean = np.asarray(eval_model(m, grid), dtype=float)
    rng = np.random.default_rng(int(seed))
    if noise.kind == "none":
        values = clean
    elif noise.kind == "multiplicative_lognormal":
        values = clean * np.exp(noise.sigma * rng.standard_normal(grid.size))
    else:
        values = clean + noise.sigma * rng.standard_normal(grid.size)
        for i in np.flatnonzero(values <= 0):
            for _ in range(_MAX_GAUSSIAN_REDRAWS):
                values[i] = clean[i] + noise.sigma * rng.standard_normal()
                if values[i] > 0:
                    break
            else:
                raise NumericalError(f"Gaussian noise kept the value at t = {grid[i]:g} non-positive")
    return TimeSeries(grid, values, label=label)


def parse_grid(text: str) -> np.ndarray:
    """``"t0:t1:step"`` to an inclusive grid."""
    try:
        t0, t1, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ValidationError(f"grid must look like t0:t1:step, got {text!r}") from exc
    if not (step > 0 and t1 >= t0):
        raise ValidationError("grid needs step > 0 and t1 >= t0")
    count = int(np.floor((t1 - t0) / step + 1e-9)) + 1
    return t0 + step * np.arange(count)


@dataclass(frozen=True)
class TrialOutcome:
    index: int
    seed: int
    failed: bool
    naive_prefers_piecewise: bool | None = None
    naive_bic_margin: float | None = None  # BIC(exponential) - BIC(piecewise)
    verdict: str | None = None
    piecewise_breakpoint: float | None = None
    scan_breakpoint: float | None = None
    error: str = ""


@dataclass(frozen=True)
class IllusionExperimentReport:
    n_trials: int
    truth: dict
    noise: NoiseSpec
    master_seed: int
    thresholds: Thresholds
    n_failed: int
    naive_menu_spurious_rate: float | None
    full_menu_turning_point_rate: float | None
    trials: tuple[TrialOutcome, ...]


def _run_trial(truth, grid, noise, master_seed, index, thresholds, config, min_segment):
    seed = trial_seed(master_seed, index)
    try:
        ts = sample_series(truth, grid, noise, seed)
        hyp = fit_hyperbolic(ts, config)
        expo = fit_exponential(ts)
        pw = fit_piecewise_exponential(ts, min_segment)
        naive = compare_models(ts, [expo, pw])
        gap = naive.entry("exponential").bic - naive.entry("piecewise_exponential").bic
        full = compare_models(ts, [hyp, expo, pw])
        scan = reciprocal_break_scan(ts, min_segment)
        verdict = turning_point_verdict(full, scan, monotonicity_report(ts), thresholds)
    except HypergrowthError as exc:
        return TrialOutcome(index, seed, True, error=f"{type(exc).__name__}: {exc}")
    return TrialOutcome(index, seed, False,
                        naive_prefers_piecewise=bool(gap > thresholds.bic_margin),
                        naive_bic_margin=float(gap),
                        verdict=verdict.value,
                        piecewise_breakpoint=pw.model.breakpoint,
                        scan_breakpoint=scan.best_breakpoint)


def run_illusion_experiment(truth: GrowthModel, grid: Sequence[float], noise: NoiseSpec,
                            n_trials: int, master_seed: int = 0,
                            thresholds: Thresholds | None = None,
                            config: FitConfig | None = None, min_segment: int = 3,
                            n_jobs: int = 1) -> IllusionExperimentReport:
    """Measure how often a turning point is detected on data drawn from `truth`.

    The naive menu pits the exponential against the piecewise exponential;
    the full menu adds the hyperbolic model (order from `config`, default 2,
    or the truth's order when the truth is hyperbolic and no config is given)
    and applies :func:`turning_point_verdict`. Failed trials are recorded and
    excluded from both rates.
    """
    if n_trials < 1:
        raise ValidationError("n_trials must be at least 1")
    _check_seed(master_seed)
    thresholds = thresholds or Thresholds()
    if config is None:
        config = FitConfig(order=truth.order if isinstance(truth, HyperbolicModel) else 2)
    grid = np.asarray(grid, dtype=float)
    eval_model(truth, grid)  # truth must be valid on the grid

    def work(i):
        return _run_trial(truth, grid, noise, master_seed, i, thresholds, config, min_segment)

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trials = tuple(pool.map(work, range(n_trials)))
    else:
        trials = tuple(work(i) for i in range(n_trials))
    ok = [t for t in trials if not t.failed]
    naive = sum(t.naive_prefers_piecewise for t in ok) / len(ok) if ok else None
    full = sum(t.verdict == TURNING_POINT for t in ok) / len(ok) if ok else None
    return IllusionExperimentReport(n_trials, model_to_dict(truth), noise, int(master_seed),
                                    thresholds, n_trials - len(ok), naive, full, trials)


def trials_to_csv(report: IllusionExperimentReport) -> str:
    """One row per trial."""
    cols = ("index", "seed", "failed", "naive_prefers_piecewise", "naive_bic_margin",
            "verdict", "piecewise_breakpoint", "scan_breakpoint")
    lines = [",".join(cols)]
    for t in report.trials:
        row = []
        for c in cols:
            v = getattr(t, c)
            if v is None:
                row.append("")
            elif isinstance(v, bool):
                row.append(str(v).lower())
            elif isinstance(v, float):
                row.append(format_number(v))
            else:
                row.append(str(v))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
