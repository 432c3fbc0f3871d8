import numpy as np
import pytest

from hyperdiff.svgplot import emit_plot, histogram_counts


def test_histogram_counts_conserve_total():
    values = np.random.default_rng(0).standard_normal(1234)
    counts, edges = histogram_counts(values, bins=40)
    assert counts.sum() == 1234
    assert len(edges) == 41


def test_histogram_bounds_cover_data():
    values = np.array([-3.0, 0.0, 7.0])
    counts, edges = histogram_counts(values, bins=5)
    assert edges[0] == -3.0 and edges[-1] == 7.0


def test_emit_histogram_deterministic(tmp_path):
    values = np.random.default_rng(1).standard_normal(500)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot([("series", values)], "histogram", a, title="t", xlabel="x")
    emit_plot([("series", values)], "histogram", b, title="t", xlabel="x")
    assert a.read_bytes() == b.read_bytes()


def test_emit_line_deterministic(tmp_path):
    xs = np.linspace(0, 1, 20)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for p in (a, b):
        emit_plot([("f", xs, np.sin(xs)), ("g", xs, np.cos(xs))], "line", p,
                  xlabel="x", ylabel="y")
    assert a.read_bytes() == b.read_bytes()


def test_output_is_wellformed_svg(tmp_path):
    import xml.etree.ElementTree as ET
    path = tmp_path / "p.svg"
    emit_plot([("h", np.arange(10.0))], "histogram", path, title="hist")
    root = ET.parse(path).getroot()
    assert root.tag.endswith("svg")


def test_constant_data_does_not_crash(tmp_path):
    emit_plot([("flat", np.full(10, 3.0))], "histogram", tmp_path / "c.svg")


def test_bad_inputs_rejected(tmp_path):
    with pytest.raises(ValueError):
        emit_plot([], "histogram", tmp_path / "x.svg")
    with pytest.raises(ValueError):
        emit_plot([("a", [1.0])], "scatter", tmp_path / "x.svg")
