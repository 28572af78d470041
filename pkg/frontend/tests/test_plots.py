import numpy as np
import pytest

from vistaplots import (AGGREGATE_COLUMNS, CURVE_COLUMNS, PlotSpec, SchemaError,
                        build_figure, read_aggregate, render)
from vistaplots.cli import main
from vistaplots.plots import _smooth


def write_aggregate(path, T=50, std=1.0, loss_offset=0.0, eta=10.0):
    rows = [",".join(AGGREGATE_COLUMNS)]
    for t in range(T):
        loss = loss_offset + 100.0 / (t + 1)
        gsq = 50.0 / (t + 1)
        rows.append(",".join(map(str, [t, loss, std, gsq, std / 2, eta - t * 0.1,
                                       0.9, 0.1, 0.1])))
    path.write_text("\n".join(rows) + "\n")
    return path


def write_curve(path, n=5):
    rows = [",".join(CURVE_COLUMNS)]
    for i in range(n):
        eta = 2.0 + i
        rows.append(",".join(map(str, [eta, 0.1 + 0.2 * i, 1.0 + i, eta - 1,
                                       0.01, 0.02])))
    path.write_text("\n".join(rows) + "\n")
    return path


def test_spec_validation(tmp_path):
    with pytest.raises(SchemaError, match="kind"):
        PlotSpec(kind="pie", inputs=["x.csv"], out=tmp_path / "o.png")
    with pytest.raises(SchemaError, match="input"):
        PlotSpec(kind="trajectory", inputs=[], out=tmp_path / "o.png")
    with pytest.raises(SchemaError, match="metric"):
        PlotSpec(kind="trajectory", inputs=["x.csv"], out=tmp_path / "o.png",
                 metric="accuracy")


def test_missing_column_is_named(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,mean_loss\n0,1.0\n")
    with pytest.raises(SchemaError, match="std_loss"):
        read_aggregate(p)


def test_single_run_band_has_zero_width(tmp_path):
    p = write_aggregate(tmp_path / "solo.csv", std=0.0)
    spec = PlotSpec(kind="trajectory", inputs=[p], out=tmp_path / "o.png")
    fig = build_figure(spec)
    ax = fig.axes[0]
    assert len(ax.lines) == 1
    (band,) = ax.collections
    t = np.arange(50)
    mean = 100.0 / (t + 1)
    for x, y in band.get_paths()[0].vertices:
        assert y == pytest.approx(np.interp(x, t, mean), abs=1e-9)


def test_curve_plot_single_point_marker(tmp_path):
    p = write_curve(tmp_path / "curve.csv", n=1)
    spec = PlotSpec(kind="curve", inputs=[p], out=tmp_path / "o.png")
    fig = build_figure(spec)
    for ax in fig.axes:
        (line,) = ax.lines
        assert len(line.get_xdata()) == 1
        assert line.get_marker() == "o"


def test_eta_trace_series(tmp_path):
    a = write_aggregate(tmp_path / "one.csv", eta=30.0)
    b = write_aggregate(tmp_path / "two.csv", eta=5.0)
    spec = PlotSpec(kind="eta-trace", inputs=[a, b], out=tmp_path / "o.png")
    fig = build_figure(spec)
    ax = fig.axes[0]
    assert [ln.get_label() for ln in ax.lines] == ["one", "two"]
    np.testing.assert_allclose(ax.lines[0].get_ydata()[0], 30.0)


def test_sensitivity_panels(tmp_path):
    files = [write_aggregate(tmp_path / f"c{i}.csv") for i in range(3)]
    spec = PlotSpec(kind="sensitivity", inputs=files, out=tmp_path / "o.png",
                    metric="gradsq")
    fig = build_figure(spec)
    assert len(fig.axes) == 2
    assert len(fig.axes[0].lines) == 3 and len(fig.axes[1].lines) == 3


def test_render_is_idempotent_and_does_not_mutate_inputs(tmp_path):
    p = write_aggregate(tmp_path / "runs.csv")
    before = p.read_bytes()
    spec1 = PlotSpec(kind="trajectory", inputs=[p], out=tmp_path / "a.png",
                     window=5, logy=True)
    spec2 = PlotSpec(kind="trajectory", inputs=[p], out=tmp_path / "b.png",
                     window=5, logy=True)
    out1 = render(spec1)
    out2 = render(spec2)
    assert out1.read_bytes() == out2.read_bytes()
    assert p.read_bytes() == before


def test_smoothing_is_trailing_average():
    x = np.array([2.0, 4.0, 6.0, 8.0])
    np.testing.assert_allclose(_smooth(x, 2), [2.0, 3.0, 5.0, 7.0])
    np.testing.assert_allclose(_smooth(x, None), x)


def test_cli_renders_and_reports_schema_errors(tmp_path):
    p = write_aggregate(tmp_path / "runs.csv")
    out = tmp_path / "out.png"
    assert main(["--kind", "trajectory", "--in", str(p), "--out", str(out),
                 "--window", "3"]) == 0
    assert out.stat().st_size > 0
    bad = tmp_path / "bad.csv"
    bad.write_text("t\n0\n")
    assert main(["--kind", "trajectory", "--in", str(bad),
                 "--out", str(tmp_path / "x.png")]) == 2
