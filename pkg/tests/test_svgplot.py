"""SVG emission: byte determinism, graceful log fallbacks, point budgets.

No rendering library is involved, so the checks parse the emitted markup
directly: polyline point counts, circle markers, note text.
"""
import math
import os
import re

import numpy as np

from fracac.svgplot import line_plot, overlay_plot


def _polyline_points(text):
    out = []
    for m in re.finditer(r'<polyline points="([^"]*)"', text):
        out.append(m.group(1).split())
    return out


def test_line_plot_basic_markup(tmp_path):
    p = str(tmp_path / "plot.svg")
    xs = np.linspace(0.0, 1.0, 50)
    got = line_plot(p, [("first", xs, np.sin(xs)), ("second", xs, np.cos(xs))],
                    title="two curves", xlabel="x", ylabel="value")
    assert got == p
    text = open(p).read()
    assert text.startswith("<svg ") and text.endswith("</svg>\n")
    polys = _polyline_points(text)
    assert len(polys) == 2
    assert all(len(pts) == 50 for pts in polys)
    for label in ("two curves", "first", "second", "x", "value"):
        assert f">{label}</text>" in text


def test_line_plot_bytes_are_reproducible(tmp_path):
    xs = np.linspace(-1, 1, 200)
    ys = np.tanh(5 * xs)
    p1, p2 = str(tmp_path / "a.svg"), str(tmp_path / "b.svg")
    line_plot(p1, [("u", xs, ys)], title="t")
    line_plot(p2, [("u", xs, ys)], title="t")
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_line_plot_nothing_to_draw(tmp_path):
    p = str(tmp_path / "none.svg")
    nan = [float("nan")] * 4
    assert line_plot(p, [("empty", [1, 2, 3, 4], nan)]) is None
    assert not os.path.exists(p)


def test_line_plot_single_point_becomes_marker(tmp_path):
    p = str(tmp_path / "dot.svg")
    line_plot(p, [("pt", [0.5], [2.0])])
    text = open(p).read()
    assert "<circle" in text and "<polyline" not in text


def test_line_plot_drops_nonfinite_points(tmp_path):
    p = str(tmp_path / "gap.svg")
    ys = [1.0, float("nan"), 3.0, float("inf"), 5.0]
    line_plot(p, [("holey", [1, 2, 3, 4, 5], ys)])
    (pts,) = _polyline_points(open(p).read())
    assert len(pts) == 3


def test_log_scale_falls_back_on_nonpositive_data(tmp_path):
    p = str(tmp_path / "log.svg")
    line_plot(p, [("gaps", [1.0, 2.0, 3.0], [0.1, 0.0, 10.0])],
              logy=True, logx=True)
    text = open(p).read()
    assert "linear y (nonpositive data)" in text
    assert "linear x (nonpositive data)" not in text  # x stayed positive, log kept
    assert ">1e" in text  # log-x tick labels survive


def test_log_scale_proper(tmp_path):
    p = str(tmp_path / "log2.svg")
    eps = [0.8, 0.4, 0.2, 0.1]
    gap = [0.1, 0.05, 0.025, 0.0125]
    line_plot(p, [("decay", eps, gap)], logx=True, logy=True)
    text = open(p).read()
    assert "nonpositive" not in text
    # straight line in log-log: the three segment slopes agree
    (pts,) = _polyline_points(text)
    xy = np.array([[float(a) for a in pt.split(",")] for pt in pts])
    slopes = np.diff(xy[:, 1]) / np.diff(xy[:, 0])
    assert np.allclose(slopes, slopes[0], atol=5e-3)


def test_line_plot_downsamples_long_series(tmp_path):
    p = str(tmp_path / "big.svg")
    xs = np.linspace(0, 1, 10_000)
    line_plot(p, [("dense", xs, np.sin(40 * xs))])
    (pts,) = _polyline_points(open(p).read())
    assert len(pts) <= 1601  # budget plus the kept endpoint
    assert os.path.getsize(p) < 2_000_000
    first = pts[0].split(",")[0]
    last = pts[-1].split(",")[0]
    assert float(first) < float(last)  # endpoints survive the stride


def test_constant_series_padding(tmp_path):
    # degenerate ranges must not divide by zero
    p = str(tmp_path / "const.svg")
    assert line_plot(p, [("flat", [1.0, 2.0], [3.0, 3.0])]) == p
    assert line_plot(p, [("tall", [1.0, 1.0], [3.0, 4.0])]) == p


def test_overlay_plot_segments_and_points(tmp_path):
    p = str(tmp_path / "iface.svg")
    segs = [((0.0, 0.0), (1.0, 0.0)), ((1.0, 0.0), (1.0, 1.0))]
    pts = [(0.5, 0.5), (0.25, 0.75), (0.1, 0.1)]
    got = overlay_plot(p, segs, points=pts, title="interface")
    assert got == p
    text = open(p).read()
    assert text.count("<line ") == 2
    assert text.count("<circle ") == 3
    assert ">interface</text>" in text
    p2 = str(tmp_path / "iface2.svg")
    overlay_plot(p2, segs, points=pts, title="interface")
    assert open(p).read() == open(p2).read()


def test_overlay_plot_empty_returns_none(tmp_path):
    p = str(tmp_path / "void.svg")
    assert overlay_plot(p, [], points=[]) is None
    assert not os.path.exists(p)
