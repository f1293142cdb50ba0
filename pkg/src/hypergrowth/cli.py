"""Command-line front end.

Exit codes: 0 success, 2 I/O error, 3 invalid data or flags, 4 numerical
failure (non-converged fit, positivity violation).
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .diagnostics import Thresholds, run_diagnostics
from .errors import HypergrowthError, NumericalError, ValidationError
from .fitting import FitConfig, fit_hyperbolic_stages
from .models import model_from_dict
from .render import VIEW_MODES, ModelOverlay, PlotSpec, SeriesLayer, save_plot, write_views
from .report import build_report, dumps
from .synth import NoiseSpec, parse_grid, run_illusion_experiment, sample_series, trials_to_csv
from .timeseries import parse_timeseries_csv, to_csv

EXIT_OK = 0
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

_METHODS = {"recip": "reciprocal_ols", "nls": "nls", "recip+nls": "reciprocal_then_nls"}
_NOISE = {"none": "none", "lognormal": "multiplicative_lognormal", "gaussian": "additive_gaussian"}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _read_bytes(path: str) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _load_series(path: str):
    data = _read_bytes(path)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ValidationError(f"{path}: not UTF-8 text") from exc
    return data, parse_timeseries_csv(text, label=path)


def _load_model(path: str):
    data = _read_bytes(path)
    try:
        desc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: not a JSON model description ({exc})") from exc
    if not isinstance(desc, dict):
        raise ValidationError(f"{path}: model description must be a JSON object")
    return data, model_from_dict(desc)


def _parse_noise(text: str) -> NoiseSpec:
    kind, _, sigma = text.partition(":")
    if kind not in _NOISE:
        raise ValidationError(f"noise must be none, lognormal:SIGMA or gaussian:SIGMA, got {text!r}")
    if kind == "none":
        return NoiseSpec("none", 0.0)
    try:
        return NoiseSpec(_NOISE[kind], float(sigma))
    except ValueError as exc:
        raise ValidationError(f"bad noise sigma in {text!r}") from exc


def _emit(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fit_config(args) -> FitConfig:
    return FitConfig(method=_METHODS[args.method], order=args.order)


def cmd_fit(args) -> int:
    data, ts = _load_series(args.data)
    stages = fit_hyperbolic_stages(ts, _fit_config(args))
    _emit(dumps(build_report(data, stages)), args.output)
    if args.figures:
        write_views(ts, stages[-1].model, args.figures)
    final = stages[-1]
    if not final.converged:
        print(f"error: refinement did not converge ({final.note})", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_diagnose(args) -> int:
    data, ts = _load_series(args.data)
    thresholds = Thresholds(args.bic_margin, args.downward_required)
    diag = run_diagnostics(ts, _fit_config(args), thresholds, args.min_segment)
    _emit(dumps(build_report(data, diag.fits, diag)), args.output)
    if args.figures:
        write_views(ts, diag.hyperbolic_fit.model, args.figures)
    return EXIT_OK


def cmd_simulate(args) -> int:
    data, model = _load_model(args.model)
    grid = parse_grid(args.grid)
    noise = _parse_noise(args.noise)
    if args.trials is None:
        ts = sample_series(model, grid, noise, args.seed)
        _emit(to_csv(ts), args.output)
        return EXIT_OK
    exp = run_illusion_experiment(model, grid, noise, args.trials, args.seed,
                                  Thresholds(args.bic_margin, args.downward_required),
                                  min_segment=args.min_segment, n_jobs=args.jobs)
    _emit(dumps(build_report(data, experiment=exp)), args.output)
    if args.trials_csv:
        _emit(trials_to_csv(exp), args.trials_csv)
    return EXIT_OK


def cmd_plot(args) -> int:
    _, ts = _load_series(args.data)
    overlays = []
    if args.overlay:
        _, model = _load_model(args.overlay)
        overlays.append(ModelOverlay(model, label="model"))
    spec = PlotSpec([SeriesLayer(ts, label="data")], overlays, axis_mode=VIEW_MODES[args.mode],
                    time_axis_reversed=not args.no_reverse_time, title=args.title or "")
    save_plot(spec, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="hypergrowth",
                             description="Fit hyperbolic growth and test for turning points.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def fit_options(p):
        p.add_argument("--order", type=int, default=2, choices=(1, 2, 3))
        p.add_argument("--method", choices=tuple(_METHODS), default="recip+nls")
        p.add_argument("-o", "--output", help="report path (default: stdout)")
        p.add_argument("--figures", metavar="DIR",
                       help="also write linear/semilog/reciprocal SVG views and the fitted curve CSV")

    def verdict_options(p):
        p.add_argument("--bic-margin", type=float, default=10.0)
        p.add_argument("--min-segment", type=int, default=3)
        p.add_argument("--downward-required", action=argparse.BooleanOptionalAction, default=True)

    p = sub.add_parser("fit", help="fit a hyperbolic model")
    p.add_argument("data")
    fit_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="full diagnostic battery and verdict")
    p.add_argument("data")
    fit_options(p)
    verdict_options(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="synthetic series or Monte Carlo experiment")
    p.add_argument("--model", required=True, help="JSON model description")
    p.add_argument("--grid", required=True, help="t0:t1:step (inclusive)")
    p.add_argument("--noise", default="lognormal:0.05", help="none | lognormal:SIGMA | gaussian:SIGMA")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--trials-csv", metavar="PATH", help="per-trial CSV dump")
    p.add_argument("-o", "--output", help="output path (default: stdout)")
    verdict_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="render an SVG view")
    p.add_argument("data")
    p.add_argument("--mode", choices=tuple(VIEW_MODES), default="linear")
    p.add_argument("--overlay", help="JSON model description to draw over the data")
    p.add_argument("--title")
    p.add_argument("--no-reverse-time", action="store_true",
                   help="draw time left to right instead of right to left")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HypergrowthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
