import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hypergrowth import (ExponentialModel, ModelOverlay, PlotSpec, SeriesLayer, TimeSeries,
                         ValidationError, export_curve_csv, parse_timeseries_csv, render_plot,
                         transform_series)
from hypergrowth.render import overlay_curve, write_views

SVG = "{http://www.w3.org/2000/svg}"
XLINK = "{http://www.w3.org/1999/xlink}"


def markers(svg, gid="series-0"):
    root = ET.fromstring(svg)
    group = next(g for g in root.iter(SVG + "g") if g.get("id") == gid)
    return [(float(u.get("x")), float(u.get("y"))) for u in group.iter(SVG + "use")]


def test_two_point_series_has_two_markers():
    svg = render_plot(PlotSpec([SeriesLayer(TimeSeries([0, 10], [1, 5]))]))
    root = ET.fromstring(svg)
    assert root.tag == SVG + "svg"
    assert len(markers(svg)) == 2
    assert "Time [Years BP]" in svg


def test_render_is_byte_identical(rock_shelter_series, rock_shelter_model):
    spec = PlotSpec([SeriesLayer(rock_shelter_series, label="data")],
                    [ModelOverlay(rock_shelter_model, label="fit")], axis_mode="reciprocal_y",
                    title="reciprocal")
    assert render_plot(spec) == render_plot(spec)


def test_reversed_time_axis_puts_past_on_the_left():
    ts = TimeSeries([0, 10000], [5, 1])
    (x_now, _), (x_past, _) = markers(render_plot(PlotSpec([SeriesLayer(ts)])))
    assert x_past < x_now
    (x_now, _), (x_past, _) = markers(render_plot(PlotSpec([SeriesLayer(ts)], time_axis_reversed=False)))
    assert x_now < x_past


def test_semilog_matches_linear_of_log(rock_shelter_series):
    semi = markers(render_plot(PlotSpec([SeriesLayer(rock_shelter_series)], axis_mode="semilog_y")))
    logged = transform_series(rock_shelter_series, "log")
    lin = markers(render_plot(PlotSpec([SeriesLayer(logged)], axis_mode="linear")))
    assert len(semi) == len(lin) == 201
    assert np.max(np.abs(np.array(semi) - np.array(lin))) <= 0.5


def test_axis_labels_follow_mode(rock_shelter_series):
    svg = render_plot(PlotSpec([SeriesLayer(rock_shelter_series)], axis_mode="reciprocal_y"))
    assert "1/N(t)" in svg


def test_reciprocal_overlay_endpoints(rock_shelter_model):
    t, y = overlay_curve(ModelOverlay(rock_shelter_model), "reciprocal_y")
    assert (t[0], t[-1]) == (0.0, 10000.0) and len(t) == 256
    assert y[0] == pytest.approx(0.0006875, abs=1e-6)
    assert y[-1] == pytest.approx(0.0111543, abs=1e-6)
    ts = parse_timeseries_csv(export_curve_csv(rock_shelter_model, [0, 10000]))
    recip = 1.0 / ts.values
    assert recip[0] == pytest.approx(0.0006875, abs=1e-6)
    assert recip[1] == pytest.approx(0.0111543, abs=1e-6)


def test_overlay_is_drawn(rock_shelter_model):
    svg = render_plot(PlotSpec(overlay_models=[ModelOverlay(rock_shelter_model)]))
    root = ET.fromstring(svg)
    assert any(g.get("id") == "overlay-0" for g in root.iter(SVG + "g"))


def test_export_rock_shelter_row(rock_shelter_model):
    text = export_curve_csv(rock_shelter_model, [0])
    header, row = text.splitlines()
    assert header == "t_bp,value"
    t, v = row.split(",")
    assert t == "0" and float(v) == pytest.approx(1454.5455, abs=1e-4)
    assert len(re.sub(r"[^0-9]", "", v).lstrip("0")) >= 10


def test_export_flat_exponential():
    text = export_curve_csv(ExponentialModel(1.0, 0.0), [0, 1])
    assert text == "t_bp,value\n0,1\n1,1\n"


def test_export_roundtrip(rock_shelter_model, site_grid):
    ts = parse_timeseries_csv(export_curve_csv(rock_shelter_model, site_grid))
    from hypergrowth import eval_model
    assert np.array_equal(ts.values, eval_model(rock_shelter_model, site_grid))


def test_export_outside_domain(rock_shelter_model):
    with pytest.raises(ValidationError):
        export_curve_csv(rock_shelter_model, [0, 20000])


def test_empty_spec_rejected():
    with pytest.raises(ValidationError):
        render_plot(PlotSpec())


def test_nonpositive_values_rejected_in_log_views():
    logged = transform_series(TimeSeries([0, 1, 2], [0.5, 1, 2]), "log")
    for mode in ("semilog_y", "reciprocal_y"):
        with pytest.raises(ValidationError):
            render_plot(PlotSpec([SeriesLayer(logged)], axis_mode=mode))


def test_write_views(tmp_path, rock_shelter_series, rock_shelter_model):
    paths = write_views(rock_shelter_series, rock_shelter_model, tmp_path)
    names = sorted(p.rsplit("/", 1)[-1] for p in paths)
    assert names == ["series_fit.csv", "series_linear.svg", "series_reciprocal.svg", "series_semilog.svg"]
