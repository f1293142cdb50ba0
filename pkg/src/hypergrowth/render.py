"""SVG figures of a series in linear, semi-log and reciprocal views.

Rendering goes through matplotlib's SVG backend with a fixed hash salt, no
date metadata and text kept as text, so identical specs give byte-identical
files. Data markers and overlay curves carry ``gid`` attributes
(``series-<i>``, ``overlay-<i>``) to make the output checkable by structure.
"""

from __future__ import annotations

import io
import os
import threading
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .errors import ValidationError
from .models import DEFAULT_DOMAIN, GrowthModel, HyperbolicModel, eval_model
from .timeseries import HEADER, TimeSeries, format_number

AxisMode = Literal["linear", "semilog_y", "reciprocal_y"]
AXIS_MODES = ("linear", "semilog_y", "reciprocal_y")
TIME_LABEL = "Time [Years BP]"
PAD_FRACTION = 0.05
DPI = 100

_RC = {
    "svg.hashsalt": "hypergrowth",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 11,
    "axes.linewidth": 0.8,
    "lines.markersize": 4.5,
}
# matplotlib's rc state is process-global.
_LOCK = threading.Lock()


@dataclass(frozen=True)
class SeriesLayer:
    series: TimeSeries
    style: Literal["scatter", "line"] = "scatter"
    label: str = ""


@dataclass(frozen=True)
class ModelOverlay:
    """A model curve sampled at `samples` evenly spaced times.

    The sampling range defaults to the model domain (hyperbolic) or the
    plotted data range.
    """

    model: GrowthModel
    label: str = ""
    samples: int = 256
    t_range: tuple[float, float] | None = None


@dataclass(frozen=True)
class PlotSpec:
    series: Sequence[SeriesLayer] = ()
    overlay_models: Sequence[ModelOverlay] = ()
    axis_mode: AxisMode = "linear"
    time_axis_reversed: bool = True
    title: str = ""
    width: int = 800
    height: int = 600
    value_label: str = "N(t)"


def _y_label(spec: PlotSpec) -> str:
    if spec.axis_mode == "reciprocal_y":
        return f"1/{spec.value_label}"
    if spec.axis_mode == "semilog_y":
        return f"{spec.value_label} (log scale)"
    return spec.value_label


def _transform(values: np.ndarray, mode: AxisMode) -> np.ndarray:
    if mode != "linear" and np.any(values <= 0):
        raise ValidationError(f"{mode} view needs strictly positive values")
    return 1.0 / values if mode == "reciprocal_y" else values


def overlay_curve(overlay: ModelOverlay, mode: AxisMode = "linear",
                  data_range: tuple[float, float] | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Sample times and plotted values of an overlay in the given view."""
    if overlay.samples < 2:
        raise ValidationError("overlay needs at least 2 samples")
    if overlay.t_range is not None:
        lo, hi = overlay.t_range
    elif isinstance(overlay.model, HyperbolicModel):
        lo, hi = overlay.model.domain
    else:
        lo, hi = data_range or DEFAULT_DOMAIN
    t = np.linspace(lo, hi, overlay.samples)
    return t, _transform(np.asarray(eval_model(overlay.model, t), dtype=float), mode)


def _padded(lo: float, hi: float) -> tuple[float, float]:
    span = hi - lo
    pad = PAD_FRACTION * span if span > 0 else max(abs(lo), 1.0) * PAD_FRACTION
    return lo - pad, hi + pad


def _layers(spec: PlotSpec):
    if spec.axis_mode not in AXIS_MODES:
        raise ValidationError(f"unknown axis mode {spec.axis_mode!r}")
    if not spec.series and not spec.overlay_models:
        raise ValidationError("plot needs at least one series or overlay")
    out = []
    for i, layer in enumerate(spec.series):
        y = _transform(np.asarray(layer.series.values, dtype=float), spec.axis_mode)
        out.append((f"series-{i}", layer.style, layer.label, np.asarray(layer.series.t), y))
    if spec.series:
        data_range = (min(float(l.series.t.min()) for l in spec.series),
                      max(float(l.series.t.max()) for l in spec.series))
    else:
        data_range = None
    for i, ov in enumerate(spec.overlay_models):
        t, y = overlay_curve(ov, spec.axis_mode, data_range)
        out.append((f"overlay-{i}", "curve", ov.label, t, y))
    return out


def render_plot(spec: PlotSpec) -> str:
    """Render `spec` to an SVG 1.1 document.

    Data ranges are padded by 5% (in log space for the semi-log view). With
    ``time_axis_reversed`` the larger ``t_bp`` sits on the left edge, so time
    flows right to left.

    Raises
    ------
    ValidationError
        Empty spec, or non-positive values in the semi-log/reciprocal view.
    """
    layers = _layers(spec)
    all_t = np.concatenate([l[3] for l in layers])
    all_y = np.concatenate([l[4] for l in layers])
    xlo, xhi = _padded(float(all_t.min()), float(all_t.max()))
    if spec.axis_mode == "semilog_y":
        ylo, yhi = _padded(float(np.log10(all_y.min())), float(np.log10(all_y.max())))
        ylo, yhi = 10.0 ** ylo, 10.0 ** yhi
    else:
        ylo, yhi = _padded(float(all_y.min()), float(all_y.max()))

    with _LOCK, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(spec.width / DPI, spec.height / DPI), dpi=DPI)
        FigureCanvasSVG(fig)
        fig.subplots_adjust(left=0.13, right=0.96, bottom=0.1, top=0.92)
        ax = fig.add_subplot(1, 1, 1)
        if spec.axis_mode == "semilog_y":
            ax.set_yscale("log")
        for gid, style, label, t, y in layers:
            kw = {"gid": gid, "label": label or None}
            if style == "scatter":
                ax.plot(t, y, linestyle="none", marker="o", color="k", **kw)
            elif style == "line":
                ax.plot(t, y, "-", color="k", linewidth=1.0, **kw)
            else:
                ax.plot(t, y, "-", color="tab:red", linewidth=1.5, **kw)
        ax.set_xlim((xhi, xlo) if spec.time_axis_reversed else (xlo, xhi))
        ax.set_ylim(ylo, yhi)
        ax.set_xlabel(TIME_LABEL)
        ax.set_ylabel(_y_label(spec))
        if spec.title:
            ax.set_title(spec.title)
        if any(l[2] for l in layers):
            ax.legend(loc="best", frameon=False)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def save_plot(spec: PlotSpec, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_plot(spec))


def export_curve_csv(m: GrowthModel, grid: Sequence[float]) -> str:
    """Model values on `grid` as ``t_bp,value`` CSV (shortest round-trip floats)."""
    grid = np.asarray(grid, dtype=float)
    values = np.atleast_1d(eval_model(m, grid))
    rows = [HEADER] + [f"{format_number(t)},{format_number(v)}" for t, v in zip(grid, values)]
    return "\n".join(rows) + "\n"


VIEW_MODES = {"linear": "linear", "semilog": "semilog_y", "reciprocal": "reciprocal_y"}


def write_views(ts: TimeSeries, model: GrowthModel | None, outdir: str | os.PathLike,
                stem: str = "series") -> list[str]:
    """Write the linear, semi-log and reciprocal views (plus the fitted curve CSV)."""
    os.makedirs(outdir, exist_ok=True)
    overlays = [ModelOverlay(model, label="fit", t_range=(float(ts.t.min()), float(ts.t.max())))] \
        if model is not None else []
    written = []
    for name, mode in VIEW_MODES.items():
        spec = PlotSpec([SeriesLayer(ts, label=ts.label or "data")], overlays, axis_mode=mode)
        path = os.path.join(outdir, f"{stem}_{name}.svg")
        save_plot(spec, path)
        written.append(path)
    if model is not None:
        path = os.path.join(outdir, f"{stem}_fit.csv")
        grid = np.linspace(ts.t.min(), ts.t.max(), 256)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(export_curve_csv(model, grid))
        written.append(path)
    return written
