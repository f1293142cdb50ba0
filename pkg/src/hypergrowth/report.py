"""JSON report assembly.

Top-level keys: ``version``, ``input_digest``, ``fits``, ``diagnostics`` and,
for Monte Carlo runs, ``experiment``. Floats are written with Python's
shortest round-trip repr and key order is fixed, so identical inputs give
byte-identical reports.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict

from . import __version__
from .diagnostics import DiagnosticsReport
from .fitting import FitResult
from .models import model_to_dict
from .synth import IllusionExperimentReport


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def fit_to_dict(fit: FitResult) -> dict:
    d = {
        "stage": fit.stage,
        "model": model_to_dict(fit.model),
        "rss_raw": fit.rss_raw,
        "rss_reciprocal": fit.rss_reciprocal,
        "rss_log": fit.rss_log,
        "n": fit.n,
        "p": fit.p,
        "converged": fit.converged,
        "iterations": fit.iterations,
    }
    if fit.config is not None:
        d["config"] = asdict(fit.config)
    if fit.note:
        d["note"] = fit.note
    return d


def diagnostics_to_dict(diag: DiagnosticsReport) -> dict:
    mono = diag.monotonicity
    monotonicity = {"n_steps": mono.n_steps, "n_increasing": mono.n_increasing}
    if mono.increasing_fraction is not None:
        monotonicity["increasing_fraction"] = mono.increasing_fraction
    monotonicity["sign_test_p"] = mono.sign_test_p
    cmp = diag.comparison
    return {
        "monotonicity": monotonicity,
        "break_scan": asdict(diag.break_scan),
        "comparison": {
            "n": cmp.n,
            "entries": [asdict(e) for e in cmp.entries],
            "preferred": cmp.preferred.label,
            "warnings": list(cmp.warnings),
        },
        "verdict": {
            "value": diag.verdict.value,
            "rationale": diag.verdict.rationale,
            "thresholds": asdict(diag.verdict.thresholds),
        },
    }


def experiment_to_dict(exp: IllusionExperimentReport) -> dict:
    return {
        "n_trials": exp.n_trials,
        "truth": exp.truth,
        "noise": asdict(exp.noise),
        "master_seed": exp.master_seed,
        "seed_derivation": "splitmix64(master_seed + i * 0x9E3779B97F4A7C15)",
        "thresholds": asdict(exp.thresholds),
        "n_failed": exp.n_failed,
        "naive_menu_spurious_rate": exp.naive_menu_spurious_rate,
        "full_menu_turning_point_rate": exp.full_menu_turning_point_rate,
        "trials": [asdict(t) for t in exp.trials],
    }


def build_report(input_bytes: bytes, fits=(), diagnostics: DiagnosticsReport | None = None,
                 experiment: IllusionExperimentReport | None = None) -> dict:
    report = {
        "version": __version__,
        "input_digest": digest(input_bytes),
        "fits": [fit_to_dict(f) for f in fits],
        "diagnostics": diagnostics_to_dict(diagnostics) if diagnostics is not None else {},
    }
    if experiment is not None:
        report["experiment"] = experiment_to_dict(experiment)
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"
