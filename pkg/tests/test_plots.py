"""Tests for figure generation; series math is checked against hand
computations and files are only inspected, never displayed."""
import numpy as np
import pytest

from insertion_rl.persist import MetricsWriter
from insertion_rl.plots import (
    EmptyMetricsError,
    plot_learning_curves,
    plot_success_bars,
    success_bars_from_table,
)


def write_metrics(path, distances):
    with MetricsWriter(path) as w:
        for i, d in enumerate(distances):
            w.write_row(50 * (i + 1), i, -float(d), float(d), 0.1, 0.2, 0.3)


def test_learning_curve_envelope(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    c = tmp_path / "c.csv"
    write_metrics(a, [4.0, 3.0, 2.0, 1.0])
    write_metrics(b, [2.0, 5.0, 0.5, 3.0])
    write_metrics(c, [3.0, 1.0, 1.5])  # shorter run truncates the band
    out = tmp_path / "fig.svg"
    plotted = plot_learning_curves({"sac": [a, b, c]}, out)
    assert out.is_file() and out.stat().st_size > 0
    assert b"<svg" in out.read_bytes()[:500]
    series = plotted["sac"]
    np.testing.assert_allclose(series["mean"], [3.0, 3.0, 4.0 / 3.0])
    np.testing.assert_allclose(series["lo"], [2.0, 1.0, 0.5])
    np.testing.assert_allclose(series["hi"], [4.0, 5.0, 2.0])


def test_learning_curve_other_column(tmp_path):
    a = tmp_path / "a.csv"
    write_metrics(a, [1.0, 2.0])
    plotted = plot_learning_curves({"x": [a]}, tmp_path / "f.svg", column="return")
    np.testing.assert_allclose(plotted["x"]["mean"], [-1.0, -2.0])


def test_empty_metrics_raises(tmp_path):
    path = tmp_path / "empty.csv"
    MetricsWriter(path).close()  # header only
    with pytest.raises(EmptyMetricsError):
        plot_learning_curves({"x": [path]}, tmp_path / "f.svg")


def test_unknown_column_raises(tmp_path):
    path = tmp_path / "m.csv"
    write_metrics(path, [1.0])
    with pytest.raises(KeyError):
        plot_learning_curves({"x": [path]}, tmp_path / "f.svg", column="no_such")


def test_label_without_runs_raises(tmp_path):
    with pytest.raises(ValueError, match="no metrics files"):
        plot_learning_curves({"x": []}, tmp_path / "f.svg")


def test_success_bars_from_table(tmp_path):
    table = tmp_path / "table.csv"
    table.write_text(
        "cell,success_rate,error\n"
        "usb-residual,0.92,\n"
        "usb-pure,0.4,\n"
        "usb-broken,nan,Boom\n"
    )
    out = tmp_path / "bars.svg"
    rates = success_bars_from_table(table, out)
    assert rates == {"usb-residual": 0.92, "usb-pure": 0.4}
    assert out.is_file() and b"<svg" in out.read_bytes()[:500]


def test_success_bars_all_failed(tmp_path):
    table = tmp_path / "table.csv"
    table.write_text("cell,success_rate,error\nusb,nan,Boom\n")
    with pytest.raises(EmptyMetricsError, match="no successful cells"):
        success_bars_from_table(table, tmp_path / "bars.svg")


def test_plot_success_bars_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        plot_success_bars({}, tmp_path / "bars.svg")
