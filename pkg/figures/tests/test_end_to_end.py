"""Drives the phonon-inverse CLI (the producing side of the CSV interface)
at desk scale, then renders every figure kind from the real outputs."""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from phonon_figures.cli import main as figures_main

PRIMARY = shutil.which("phonon-inverse")

pytestmark = pytest.mark.skipif(PRIMARY is None,
                                reason="phonon-inverse CLI not installed")


def run_primary(args):
    proc = subprocess.run([PRIMARY, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def desk_outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    sweep_cfg = root / "sweep.json"
    sweep_cfg.write_text(json.dumps({
        "epsilon_list": [0.5, 1.0, 2.0],
        "grid": {"preset": "desk"},
        "eta": {"kind": "tanh", "a": 1.5, "b": 1.0},
        "eta2": {"kind": "tanh", "a": 1.4, "b": 0.9},
        "source": {"kind": "grid_delta", "mu0": 0.935},
    }))
    run_primary(["sweep", "--config", str(sweep_cfg), "--out", str(root / "sweep")])

    land_cfg = root / "land.json"
    land_cfg.write_text(json.dumps({
        "epsilon_list": [1.0],
        "grid": {"preset": "desk"},
        "source": {"kind": "grid_delta", "mu0": 0.935},
        "experiment": {"n_points": 7},
    }))
    run_primary(["landscape", "--config", str(land_cfg), "--out", str(root / "land")])

    for tag, (a, b) in (("eta1", (1.5, 1.0)), ("eta2", (1.4, 0.9))):
        cfg = root / f"solve_{tag}.json"
        cfg.write_text(json.dumps({
            "epsilon": 2.0,
            "grid": {"preset": "desk"},
            "eta": {"kind": "tanh", "a": a, "b": b},
            "source": {"kind": "grid_delta", "mu0": 0.935, "omega0": 1.4},
        }))
        run_primary(["solve", "--config", str(cfg), "--out", str(root / tag)])
    return root


def test_all_five_kinds_render_from_real_outputs(desk_outputs, tmp_path):
    root = desk_outputs
    jobs = [
        ["landscape", "--in", str(root / "land" / "landscape_eps1.csv"),
         "--out", str(tmp_path / "landscape.png")],
        ["heatmap", "--in", str(root / "sweep" / "lambda_grid.csv"),
         "--run-id", "eps2-eta1", "--run-id2", "eps2-eta2",
         "--out", str(tmp_path / "heatmap.png")],
        ["curves", "--in", str(root / "sweep" / "eta_curves.csv"),
         "--out", str(tmp_path / "curves.png")],
        ["traces", "--in", str(root / "eta1" / "surface_trace.csv"),
         "--in", str(root / "eta2" / "surface_trace.csv"),
         "--out", str(tmp_path / "traces.png")],
        ["regression", "--in", str(root / "sweep" / "sweep.csv"),
         "--aux", str(root / "sweep" / "regression.json"),
         "--out", str(tmp_path / "regression.png")],
    ]
    for argv in jobs:
        assert figures_main(argv) == 0, argv
        out = tmp_path / f"{argv[0]}.png"
        assert out.exists() and out.stat().st_size > 1000


def test_regression_line_exactness_on_real_fit(desk_outputs, tmp_path):
    from phonon_figures.render import FigureJob, render

    root = desk_outputs
    aux = root / "sweep" / "regression.json"
    fig = render(FigureJob(kind="regression", inputs=[root / "sweep" / "sweep.csv"],
                           out=tmp_path / "reg.png", aux=aux))
    params = json.loads(aux.read_text())
    line = fig.axes[0].get_lines()[1]
    xs = np.asarray(line.get_xdata())
    assert np.array_equal(np.asarray(line.get_ydata()),
                          params["slope"] * xs + params["intercept"])
