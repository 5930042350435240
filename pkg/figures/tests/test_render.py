import json

import matplotlib.pyplot as plt
import numpy as np
import pytest

from phonon_figures.render import FigureJob, RenderError, render


def teardown_function(_fn):
    plt.close("all")


class TestLandscape:
    def test_overlaid_curves(self, landscape_csvs, tmp_path):
        out = tmp_path / "landscape.png"
        fig = render(FigureJob(kind="landscape", inputs=landscape_csvs, out=out))
        assert out.exists() and out.stat().st_size > 0
        ax = fig.axes[0]
        assert len(ax.get_lines()) == 3
        labels = [t.get_text() for t in ax.get_legend().get_texts()]
        assert "eps = 0.25" in labels

    def test_missing_column_is_named(self, tmp_path):
        bad = tmp_path / "landscape_eps1.csv"
        bad.write_text("b,cost\n1.0,2.0\n")
        with pytest.raises(RenderError, match="loss"):
            render(FigureJob(kind="landscape", inputs=[bad], out=tmp_path / "x.png"))

    def test_empty_csv_is_error_not_empty_plot(self, tmp_path):
        bad = tmp_path / "landscape_eps1.csv"
        bad.write_text("b,loss\n")
        with pytest.raises(RenderError, match="no data rows"):
            render(FigureJob(kind="landscape", inputs=[bad], out=tmp_path / "x.png"))


class TestHeatmap:
    def test_single_run(self, lambda_grid_csv, tmp_path):
        out = tmp_path / "heat.png"
        render(FigureJob(kind="heatmap", inputs=[lambda_grid_csv], out=out,
                         options={"run_id": "eps1-eta1"}))
        assert out.exists()

    def test_difference_of_runs(self, lambda_grid_csv, tmp_path):
        out = tmp_path / "diff.png"
        fig = render(FigureJob(kind="heatmap", inputs=[lambda_grid_csv], out=out,
                               options={"run_id": "eps1-eta1", "run_id2": "eps1-eta2"}))
        # the annotated maximum reflects the 10% split between the two runs
        texts = [t.get_text() for t in fig.axes[0].texts]
        assert any("max |value|" in t for t in texts)

    def test_unknown_run_id(self, lambda_grid_csv, tmp_path):
        with pytest.raises(RenderError, match="available"):
            render(FigureJob(kind="heatmap", inputs=[lambda_grid_csv],
                             out=tmp_path / "x.png", options={"run_id": "nope"}))


class TestCurves:
    def test_two_reflectances(self, eta_curves_csv, tmp_path):
        out = tmp_path / "eta.png"
        fig = render(FigureJob(kind="curves", inputs=[eta_curves_csv], out=out))
        assert out.exists()
        assert len(fig.axes[0].get_lines()) == 2


class TestTraces:
    def test_two_traces_with_difference(self, trace_csvs, tmp_path):
        out = tmp_path / "traces.png"
        fig = render(FigureJob(kind="traces", inputs=list(trace_csvs), out=out))
        # two traces plus the dashed difference
        assert len(fig.axes[0].get_lines()) == 3

    def test_single_trace(self, trace_csvs, tmp_path):
        out = tmp_path / "trace.png"
        fig = render(FigureJob(kind="traces", inputs=[trace_csvs[0]], out=out))
        assert len(fig.axes[0].get_lines()) == 1


class TestRegression:
    def test_line_matches_regression_json_exactly(self, sweep_with_regression, tmp_path):
        sweep_csv, aux = sweep_with_regression
        out = tmp_path / "reg.png"
        fig = render(FigureJob(kind="regression", inputs=[sweep_csv], out=out, aux=aux))
        ax = fig.axes[0]
        scatter, line = ax.get_lines()
        params = json.loads(aux.read_text())
        xs = np.asarray(line.get_xdata())
        expected = params["slope"] * xs + params["intercept"]
        assert np.array_equal(np.asarray(line.get_ydata()), expected)

    def test_missing_aux_is_error(self, sweep_with_regression, tmp_path):
        sweep_csv, _ = sweep_with_regression
        with pytest.raises(RenderError, match="aux"):
            render(FigureJob(kind="regression", inputs=[sweep_csv],
                             out=tmp_path / "x.png"))

    def test_skipped_regression_rejected(self, sweep_with_regression, tmp_path):
        sweep_csv, aux = sweep_with_regression
        aux.write_text(json.dumps({"skipped": True, "reason": "identical traces"}))
        with pytest.raises(RenderError, match="identical traces"):
            render(FigureJob(kind="regression", inputs=[sweep_csv],
                             out=tmp_path / "x.png", aux=aux))


class TestJobValidation:
    def test_unknown_kind(self, tmp_path):
        with pytest.raises(RenderError, match="kind"):
            FigureJob(kind="pie", inputs=["x.csv"], out=tmp_path / "x.png")

    def test_inputs_required(self, tmp_path):
        with pytest.raises(RenderError, match="input"):
            FigureJob(kind="curves", inputs=[], out=tmp_path / "x.png")

    def test_inputs_never_mutated(self, eta_curves_csv, tmp_path):
        before = eta_curves_csv.read_bytes()
        render(FigureJob(kind="curves", inputs=[eta_curves_csv],
                         out=tmp_path / "eta.png"))
        assert eta_curves_csv.read_bytes() == before
