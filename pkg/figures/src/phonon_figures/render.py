"""Figure rendering for the experiment CSV outputs.

Five figure kinds, one per experiment artifact:

  landscape   landscape_eps*.csv (b, loss)           -> overlaid loss curves
  heatmap     lambda_grid.csv (omega_i, t, value,
              run_id)                                 -> (omega, t) map, or the
                                                         difference of two runs
  curves      eta_curves.csv (omega, eta1, eta2, ...) -> reflectance curves
  traces      surface_trace.csv (t, delta_T)          -> time traces / difference
  regression  sweep.csv + regression.json             -> log decay scatter with
                                                         the fitted line overlaid

Inputs are never mutated; rendering is deterministic (fixed figure size,
colormap, and dpi).  Missing columns and empty files raise named errors
instead of producing empty plots.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["FigureJob", "RenderError", "render", "KINDS"]

FIGSIZE = (6.4, 4.2)
DPI = 150
HEAT_CMAP = "viridis"

KINDS = ("landscape", "heatmap", "curves", "traces", "regression")


class RenderError(ValueError):
    """Input file unusable for the requested figure."""


@dataclass
class FigureJob:
    """One rendering task: inputs, figure kind, output path, options."""

    kind: str
    inputs: list
    out: Path
    aux: Path | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        self.inputs = [Path(p) for p in self.inputs]
        self.out = Path(self.out)
        if not self.inputs:
            raise RenderError("at least one input CSV is required")


def read_columns(path, required: tuple) -> dict:
    """Read a CSV into float column arrays; named errors on schema problems."""
    path = Path(path)
    if not path.exists():
        raise RenderError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        missing = [c for c in required if c not in names]
        if missing:
            raise RenderError(f"{path.name}: missing column(s) {missing}; found {names}")
        rows = list(reader)
    if not rows:
        raise RenderError(f"{path.name}: no data rows")
    out = {}
    for name in names:
        col = [r[name] for r in rows]
        try:
            out[name] = np.asarray([float(v) for v in col])
        except ValueError:
            out[name] = np.asarray(col)  # non-numeric column (e.g. run_id)
    return out


def _label_for(path: Path, fallback: str) -> str:
    stem = path.stem
    if "eps" in stem:
        tag = stem.split("eps")[-1].replace("p", ".")
        return f"eps = {tag}"
    return fallback


def _render_landscape(job: FigureJob, fig, ax):
    labels = job.options.get("labels") or []
    for k, path in enumerate(job.inputs):
        cols = read_columns(path, ("b", "loss"))
        label = labels[k] if k < len(labels) else _label_for(path, path.stem)
        ax.plot(cols["b"], cols["loss"], marker="o", ms=3, label=label)
    ax.set_xlabel("b")
    ax.set_ylabel("loss")
    if job.options.get("logy", True):
        ax.set_yscale("log")
    ax.set_title("Loss landscape over the reflectance knee b")
    ax.legend()


def _grid_from_records(cols, run_id: str):
    mask = cols["run_id"] == run_id
    if not mask.any():
        ids = sorted(set(cols["run_id"].tolist()))
        raise RenderError(f"run_id {run_id!r} not present; available: {ids}")
    om = cols["omega_i"][mask]
    t = cols["t"][mask]
    v = cols["value"][mask]
    om_axis = np.unique(om)
    t_axis = np.unique(t)
    zz = np.full((len(t_axis), len(om_axis)), np.nan)
    ti = np.searchsorted(t_axis, t)
    oi = np.searchsorted(om_axis, om)
    zz[ti, oi] = v
    return om_axis, t_axis, zz


def _render_heatmap(job: FigureJob, fig, ax):
    cols = read_columns(job.inputs[0], ("omega_i", "t", "value", "run_id"))
    run_id = job.options.get("run_id")
    if run_id is None:
        run_id = str(cols["run_id"][0])
    om, t, zz = _grid_from_records(cols, run_id)
    title = f"surface response, {run_id}"
    run_id2 = job.options.get("run_id2")
    if run_id2:
        om2, t2, zz2 = _grid_from_records(cols, run_id2)
        if zz2.shape != zz.shape:
            raise RenderError(
                f"runs {run_id!r} and {run_id2!r} cover different (omega, t) grids"
            )
        zz = zz - zz2
        title = f"difference, {run_id} - {run_id2}"
    zmax = float(np.nanmax(np.abs(zz)))
    masked = np.ma.masked_invalid(zz)
    mesh = ax.pcolormesh(om, t, masked, cmap=HEAT_CMAP, shading="nearest")
    fig.colorbar(mesh, ax=ax, label="delta T")
    # per-panel autoscale: the order of magnitude is the message, so print it
    ax.text(0.02, 0.98, f"max |value| = {zmax:.3e}", transform=ax.transAxes,
            va="top", ha="left", fontsize=8,
            bbox=dict(facecolor="white", alpha=0.8, edgecolor="none"))
    ax.set_xlabel("source frequency omega_i")
    ax.set_ylabel("t")
    ax.set_title(title)


def _render_curves(job: FigureJob, fig, ax):
    cols = read_columns(job.inputs[0], ("omega",))
    series = [n for n in cols if n != "omega" and np.issubdtype(cols[n].dtype, np.floating)]
    if not series:
        raise RenderError(f"{job.inputs[0].name}: no numeric curves besides omega")
    for name in series:
        ax.plot(cols["omega"], cols[name], label=name)
    ax.set_xlabel("omega")
    ax.set_ylabel("eta(omega)")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Reflectance profiles")
    ax.legend()


def _render_traces(job: FigureJob, fig, ax):
    labels = job.options.get("labels") or []
    traces = []
    for k, path in enumerate(job.inputs):
        cols = read_columns(path, ("t", "delta_T"))
        label = labels[k] if k < len(labels) else path.stem
        ax.plot(cols["t"], cols["delta_T"], label=label)
        traces.append(cols)
    if len(traces) == 2 and job.options.get("diff", True):
        t1, t2 = traces
        if len(t1["t"]) == len(t2["t"]) and np.allclose(t1["t"], t2["t"]):
            ax.plot(t1["t"], t1["delta_T"] - t2["delta_T"], ls="--",
                    label="difference")
    ax.set_xlabel("t")
    ax.set_ylabel("delta T at the surface")
    ax.set_title("Surface temperature trace")
    ax.legend()


def _render_regression(job: FigureJob, fig, ax):
    cols = read_columns(job.inputs[0], ("inv_epsilon", "log_max_diff"))
    ax.plot(cols["inv_epsilon"], cols["log_max_diff"], "o", label="measured")
    if job.aux is None:
        raise RenderError("regression figures need --aux regression.json")
    aux = json.loads(Path(job.aux).read_text())
    if aux.get("skipped"):
        raise RenderError(f"regression was skipped: {aux.get('reason', 'unknown')}")
    slope, intercept = float(aux["slope"]), float(aux["intercept"])
    xs = np.asarray(sorted(cols["inv_epsilon"]))
    ax.plot(xs, slope * xs + intercept, "-",
            label=f"fit: slope {slope:.3f}, r {aux.get('r', float('nan')):.4f}")
    ax.set_xlabel("1 / epsilon")
    ax.set_ylabel("log max |difference|")
    ax.set_title("Measurement sensitivity decay")
    ax.legend()


_RENDERERS = {
    "landscape": _render_landscape,
    "heatmap": _render_heatmap,
    "curves": _render_curves,
    "traces": _render_traces,
    "regression": _render_regression,
}


def render(job: FigureJob):
    """Render one figure job to ``job.out``; returns the matplotlib Figure."""
    fig, ax = plt.subplots(figsize=FIGSIZE, dpi=DPI)
    try:
        _RENDERERS[job.kind](job, fig, ax)
        fig.tight_layout()
        job.out.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(job.out)
    except Exception:
        plt.close(fig)
        raise
    return fig
