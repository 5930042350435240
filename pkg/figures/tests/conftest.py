import csv
import json

import numpy as np
import pytest


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture
def landscape_csvs(tmp_path):
    paths = []
    bs = np.linspace(0.5, 1.5, 21)
    for tag, scale in (("0p25", 1e-9), ("1", 1e-7), ("4", 1e-6)):
        p = tmp_path / f"landscape_eps{tag}.csv"
        write_csv(p, ["b", "loss"], [(b, scale * (b - 1.0) ** 2 + 1e-12) for b in bs])
        paths.append(p)
    return paths


@pytest.fixture
def lambda_grid_csv(tmp_path):
    p = tmp_path / "lambda_grid.csv"
    rows = []
    rng = np.random.default_rng(0)
    for om in (0.5, 1.0, 1.5):
        for k in range(12):
            t = 0.1 * k
            base = float(rng.uniform())
            rows.append((om, t, base, "eps1-eta1"))
            rows.append((om, t, base * 0.9, "eps1-eta2"))
    write_csv(p, ["omega_i", "t", "value", "run_id"], rows)
    return p


@pytest.fixture
def eta_curves_csv(tmp_path):
    p = tmp_path / "eta_curves.csv"
    om = np.linspace(0.05, 2.0, 40)
    e1 = 0.25 * np.tanh(10 * (om - 1.5)) - 0.25 * np.tanh(2 * (om - 1.0)) + 0.5
    e2 = 0.25 * np.tanh(10 * (om - 1.4)) - 0.25 * np.tanh(2 * (om - 0.9)) + 0.5
    write_csv(p, ["omega", "eta1", "eta2"], zip(om, e1, e2))
    return p


@pytest.fixture
def trace_csvs(tmp_path):
    t = np.linspace(0.0, 3.0, 200)
    p1 = tmp_path / "surface_trace.csv"
    write_csv(p1, ["t", "delta_T"], zip(t, np.exp(-t) * (1 + 0.2 * np.sin(5 * t))))
    p2 = tmp_path / "surface_trace_eta2.csv"
    write_csv(p2, ["t", "delta_T"], zip(t, np.exp(-t)))
    return p1, p2


@pytest.fixture
def sweep_with_regression(tmp_path):
    p = tmp_path / "sweep.csv"
    eps = np.asarray([0.25, 0.5, 1.0, 2.0, 4.0])
    inv = 1.0 / eps
    slope, intercept = -0.93, -6.07
    logs = slope * inv + intercept + 0.01 * np.sin(inv)
    write_csv(p, ["epsilon", "inv_epsilon", "max_diff", "log_max_diff"],
              zip(eps, inv, np.exp(logs), logs))
    aux = tmp_path / "regression.json"
    aux.write_text(json.dumps({"slope": slope, "intercept": intercept,
                               "r": -0.9997, "skipped": False}))
    return p, aux
