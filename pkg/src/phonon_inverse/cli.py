"""Command-line experiment orchestration.

Five subcommands drive the experiment harness:

  solve        one forward run -> surface_trace.csv (+ field snapshots)
  landscape    loss scans over the reflectance knee parameter b -> landscape_eps*.csv
  sweep        the epsilon stability sweep -> sweep.csv, regression.json,
               lambda_grid.csv, eta_curves.csv
  decompose    ballistic/scattering measurement split -> split.csv
  reconstruct  gradient-descent recovery of (a, b) -> recon_trace.csv

Every run writes manifest.json (resolved config, grid fingerprints, output
checksums).  Identical configs give byte-identical CSVs across reruns and
--jobs settings.

Exit codes: 0 ok, 2 config error, 3 solver/experiment error, 4 failed
invariant assertion under --strict.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .ballistic import BallisticSpec, m0_asymptotic, measurement_split
from .config import (
    ConfigError,
    build_run_pieces,
    eta_from_config,
    load_config,
    resolve_config,
    source_from_config,
    test_fn_from_config,
)
from .inverse import (
    ExperimentSetup,
    ReconstructionDiverged,
    forward_functionals,
    landscape_scan,
    measurement_functional,
    reconstruct,
    stability_sweep,
)
from .materials import InterfaceCoefficientError, MaterialValidationError
from .manifest import RunManifest, write_csv
from .solver import SolverConfig, SolverError, solve
from .sources import SourceSpec, TestFunctionSpec, round_trip_time

log = logging.getLogger("phonon_inverse")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_STRICT = 4

#: conservation tolerance enforced by --strict (relative to the quadrature L1)
STRICT_CONSERVATION_TOL = 1e-12


class StrictViolation(RuntimeError):
    pass


def _eps_tag(eps: float) -> str:
    return format(eps, "g").replace(".", "p")


def _solver_opts(cfg: dict, strict: bool) -> dict:
    s = cfg["solver"]
    return dict(
        collision=s["collision"],
        collision_mode=s["collision_mode"],
        coupling_mode=s["coupling_mode"],
        backend=s["backend"],
        substrate_length=s["substrate_length"],
        substrate_nu_ratio=s["substrate_nu_ratio"],
        substrate_tau_ratio=s["substrate_tau_ratio"],
        balance_c=s["balance_c"],
        check_finite_every=s["check_finite_every"],
        instrument=strict,
    )


def _experiment_setup(cfg: dict, epsilon: float, strict: bool = False) -> ExperimentSetup:
    grid, material = build_run_pieces(cfg, epsilon)
    return ExperimentSetup(
        epsilon=epsilon,
        grid=grid,
        material=material,
        x_max=cfg["domain"]["x_max"],
        source_template=source_from_config(cfg),
        test_template=test_fn_from_config(cfg),
        source_indices=tuple(cfg["experiment"]["source_indices"]),
        t_margin=cfg["time"]["margin"],
        t_stop_override=cfg["time"]["t_stop"],
        solver_opts=_solver_opts(cfg, strict),
    )


def _epsilons(cfg: dict) -> list:
    if cfg["epsilon_list"]:
        return [float(e) for e in cfg["epsilon_list"]]
    return [float(cfg["epsilon"])]


def _check_strict(run, where: str):
    diag = run.diagnostics
    defect = diag.get("max_conservation_defect", 0.0)
    if defect > STRICT_CONSERVATION_TOL:
        raise StrictViolation(
            f"{where}: conservation defect {defect:.3e} exceeds {STRICT_CONSERVATION_TOL:g}"
        )
    if diag.get("min_value", 0.0) < 0.0:
        raise StrictViolation(f"{where}: negative field value {diag['min_value']!r}")
    cm = diag.get("c_m", 0.0)
    if cm > 0.0 and diag.get("max_over_equilibrium", 0.0) > cm * (1.0 + 1e-12):
        raise StrictViolation(
            f"{where}: field exceeded the inflow ceiling "
            f"({diag['max_over_equilibrium']:.6g} > c_m={cm:.6g})"
        )


def _apply_noise(data: np.ndarray, cfg: dict, seed: int) -> np.ndarray:
    sigma = float(cfg["experiment"]["noise_sigma"])
    if sigma <= 0.0:
        return data
    rng = np.random.default_rng(seed)
    return data + rng.normal(0.0, sigma, size=data.shape)


# -- subcommand drivers ---------------------------------------------------------


def _cmd_solve(cfg: dict, defaults, out: Path, jobs: int, seed: int, strict: bool) -> int:
    eps = float(cfg["epsilon"])
    setup = _experiment_setup(cfg, eps, strict)
    grid = setup.grid
    src = setup.source_template
    if src.kind == "grid_delta":
        if src.omega_index is None:
            # default source channel: the omega node nearest the reference slice
            idx = grid.omega_index(src.omega0 if src.omega0 is not None else 1.45)
            src = replace(src, omega_index=idx)
        setup = replace(setup, source_template=src)
        source = setup.source_for(int(src.omega_index))
    else:
        source = src
    eta = eta_from_config(cfg["eta"])
    sc = setup.solver_config(eta, source)
    snaps = tuple(cfg["experiment"]["snapshot_times"])
    if snaps:
        sc = replace(sc, snapshot_times=snaps, keep_final_field=True)
    run = solve(sc, grid, setup.material)
    if strict:
        _check_strict(run, "solve")

    manifest = RunManifest("solve", cfg, defaults, out)
    manifest.add_grid(_eps_tag(eps), grid, {"source_nodes": run.source_nodes})
    rows = write_csv(out / "surface_trace.csv", ["t", "delta_T"],
                     zip(run.times.tolist(), run.trace.tolist()))
    manifest.add_output(out / "surface_trace.csv", rows)
    for t_snap, field in sorted(run.snapshots.items()):
        p = out / f"snapshot_t{format(t_snap, 'g').replace('.', 'p')}.npy"
        np.save(p, field)
        manifest.add_output(p)
    manifest.add_note("t1", setup.t1_for(source))
    manifest.add_note("diagnostics", {k: v for k, v in run.diagnostics.items()
                                      if isinstance(v, (int, float, str))})
    manifest.write()
    return EXIT_OK


def _cmd_landscape(cfg, defaults, out: Path, jobs: int, seed: int, strict: bool) -> int:
    exp = cfg["experiment"]
    truth = eta_from_config(exp["truth"] if isinstance(exp["truth"], dict) else cfg["eta"])
    manifest = RunManifest("landscape", cfg, defaults, out)
    for eps in _epsilons(cfg):
        setup = _experiment_setup(cfg, eps, strict)
        manifest.add_grid(_eps_tag(eps), setup.grid)
        data = _apply_noise(forward_functionals(setup, truth, jobs=jobs), cfg, seed)
        rows = landscape_scan(float(exp["a_fixed"]), tuple(exp["b_range"]),
                              int(exp["n_points"]), setup, data, jobs=jobs)
        path = out / f"landscape_eps{_eps_tag(eps)}.csv"
        n = write_csv(path, ["b", "loss"], rows)
        manifest.add_output(path, n)
    manifest.add_note("truth", truth.describe())
    manifest.write()
    return EXIT_OK


def _cmd_sweep(cfg, defaults, out: Path, jobs: int, seed: int, strict: bool) -> int:
    if cfg["eta2"] is None:
        raise ConfigError("sweep needs an eta2 block (the perturbed reflectance)")
    eta1 = eta_from_config(cfg["eta"])
    eta2 = eta_from_config(cfg["eta2"])
    stride = int(cfg["experiment"]["trace_stride"])

    def setup_for(eps):
        return _experiment_setup(cfg, eps, strict)

    result = stability_sweep(eta1, eta2, _epsilons(cfg), setup_for, jobs=jobs,
                             trace_stride=stride)
    manifest = RunManifest("sweep", cfg, defaults, out)
    for eps in _epsilons(cfg):
        manifest.add_grid(_eps_tag(eps), setup_for(eps).grid)

    n = write_csv(out / "sweep.csv",
                  ["epsilon", "inv_epsilon", "max_diff", "log_max_diff"],
                  [(r["epsilon"], r["inv_epsilon"], r["max_diff"], r["log_max_diff"])
                   for r in result["rows"]])
    manifest.add_output(out / "sweep.csv", n)

    (out / "regression.json").write_text(
        json.dumps(result["regression"], indent=2, sort_keys=True) + "\n")
    manifest.add_output(out / "regression.json")

    lam_rows = []
    for eps, omega_i, times, values, run_id in result["lambda_records"]:
        rid = f"eps{_eps_tag(eps)}-{run_id}"
        for t, v in zip(times.tolist(), values.tolist()):
            lam_rows.append((omega_i, t, v, rid))
    n = write_csv(out / "lambda_grid.csv", ["omega_i", "t", "value", "run_id"], lam_rows)
    manifest.add_output(out / "lambda_grid.csv", n)

    grid0 = setup_for(_epsilons(cfg)[0]).grid
    curves = zip(grid0.omega_nodes.tolist(),
                 eta1.values(grid0.omega_nodes).tolist(),
                 eta2.values(grid0.omega_nodes).tolist())
    n = write_csv(out / "eta_curves.csv", ["omega", "eta1", "eta2"], curves)
    manifest.add_output(out / "eta_curves.csv", n)
    manifest.add_note("regression", result["regression"])
    manifest.write()
    return EXIT_OK


def _decompose_rows(cfg, eps, eta, jobs, strict):
    exp = cfg["experiment"]
    grid, material = build_run_pieces(cfg, eps)
    src_cfg = cfg["source"]
    mu0 = float(src_cfg["mu0"])
    omega0 = float(src_cfg["omega0"]) if src_cfg["omega0"] is not None else 1.45
    x_max = float(cfg["domain"]["x_max"])
    nu0 = float(np.interp(omega0, grid.omega_nodes, material.nu))
    t1 = round_trip_time(x_max, eps, mu0, nu0)
    from .materials import compute_c_tau

    c_tau = compute_c_tau(material, grid)
    rows = []
    for theta in exp["theta_list"]:
        theta = float(theta)
        src = SourceSpec(
            kind="smooth", mu0=mu0, omega0=omega0,
            theta_t=theta,
            theta_mu=theta * float(exp["theta_mu_ratio"]),
            theta_omega=theta * float(exp["theta_omega_ratio"]),
            sampling=src_cfg["sampling"], amplitude=float(src_cfg["amplitude"]),
        )
        tf = TestFunctionSpec(kind="smooth",
                              theta=theta * float(exp["theta_test_ratio"]), t1=t1)
        t_stop = cfg["time"]["t_stop"] or (t1 + cfg["time"]["margin"] * tf.theta)
        sc = SolverConfig(epsilon=eps, eta=eta, source=src, t_stop=t_stop,
                          keep_final_field=False, **_solver_opts(cfg, strict))
        run = solve(sc, grid, material)
        if strict:
            _check_strict(run, f"decompose eps={eps} theta={theta}")
        spec = BallisticSpec(eta=eta, source=src, epsilon=eps, material=material,
                             grid=grid, x_max=x_max)
        m0, m1 = measurement_split(run, spec, tf, n_gl=int(exp["n_gl"]))
        m_total = measurement_functional(run.times, run.trace, tf)
        asym = m0_asymptotic(eta, omega0, mu0, eps, material, grid, x_max, tf,
                             src.theta_t, src.theta_mu, src.theta_omega, c_tau,
                             n_gl=int(exp["n_gl"]), amplitude=src.amplitude)
        rows.append((eps, theta, m_total, m0, m1, asym["value"]))
    return rows


def _cmd_decompose(cfg, defaults, out: Path, jobs: int, seed: int, strict: bool) -> int:
    eta1 = eta_from_config(cfg["eta"])
    manifest = RunManifest("decompose", cfg, defaults, out)
    header = ["epsilon", "theta", "M", "M0", "M1", "m0_asymptotic"]
    all_rows = []
    for eps in _epsilons(cfg):
        manifest.add_grid(_eps_tag(eps), build_run_pieces(cfg, eps)[0])
        all_rows.extend(_decompose_rows(cfg, eps, eta1, jobs, strict))
    n = write_csv(out / "split.csv", header, all_rows)
    manifest.add_output(out / "split.csv", n)
    if cfg["eta2"] is not None:
        eta2 = eta_from_config(cfg["eta2"])
        rows2 = []
        for eps in _epsilons(cfg):
            rows2.extend(_decompose_rows(cfg, eps, eta2, jobs, strict))
        n = write_csv(out / "split_eta2.csv", header, rows2)
        manifest.add_output(out / "split_eta2.csv", n)
        delta = [(r1[0], r1[1], r1[3] - r2[3], r1[5] - r2[5])
                 for r1, r2 in zip(all_rows, rows2)]
        n = write_csv(out / "delta_m0.csv",
                      ["epsilon", "theta", "delta_m0", "delta_m0_pred"], delta)
        manifest.add_output(out / "delta_m0.csv", n)
    manifest.write()
    return EXIT_OK


def _cmd_reconstruct(cfg, defaults, out: Path, jobs: int, seed: int, strict: bool) -> int:
    exp = cfg["experiment"]
    truth = eta_from_config(exp["truth"])
    manifest = RunManifest("reconstruct", cfg, defaults, out)
    eps_list = _epsilons(cfg)
    results = {}
    for eps in eps_list:
        setup = _experiment_setup(cfg, eps, strict)
        manifest.add_grid(_eps_tag(eps), setup.grid)
        data = _apply_noise(forward_functionals(setup, truth, jobs=jobs), cfg, seed)
        res = reconstruct(tuple(exp["initial"]), data, setup,
                          lr=float(exp["lr"]), max_iters=int(exp["max_iters"]),
                          grad_tol=float(exp["grad_tol"]),
                          fd_rel_step=float(exp["fd_rel_step"]), jobs=jobs)
        name = "recon_trace.csv" if len(eps_list) == 1 else f"recon_trace_eps{_eps_tag(eps)}.csv"
        n = write_csv(out / name, ["iter", "a", "b", "loss", "grad_norm"],
                      res["trajectory"])
        manifest.add_output(out / name, n)
        results[_eps_tag(eps)] = {"status": res["status"], "a": res["a"], "b": res["b"]}
    manifest.add_note("results", results)
    manifest.add_note("truth", truth.describe())
    manifest.write()
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "landscape": _cmd_landscape,
    "sweep": _cmd_sweep,
    "decompose": _cmd_decompose,
    "reconstruct": _cmd_reconstruct,
}


def _resolve_config_path(config_path) -> Path:
    """Accept a filesystem path or the name of a shipped canned config."""
    p = Path(config_path)
    if p.exists():
        return p
    name = p.name if p.name.endswith(".json") else f"{p.name}.json"
    packaged = Path(__file__).parent / "configs" / name
    if packaged.exists():
        return packaged
    raise ConfigError(
        f"config file not found: {config_path} (no shipped config {name!r} either; "
        f"available: {sorted(q.stem for q in packaged.parent.glob('*.json'))})"
    )


def run_experiment(command: str, config_path, out_dir, jobs: int = 1, seed: int = 0,
                   strict: bool = False) -> int:
    """Load a config, execute one subcommand, write artifacts + manifest."""
    if command not in _COMMANDS:
        raise ConfigError(f"unknown command {command!r}")
    if config_path is None:
        cfg, defaults = resolve_config({})
    else:
        cfg, defaults = load_config(_resolve_config_path(config_path))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _COMMANDS[command](cfg, defaults, out, jobs, seed, strict)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phonon-inverse",
        description="Kinetic-transport experiments probing the conditioning of "
                    "boundary-reflectance reconstruction",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("solve", "one forward solver run"),
        ("landscape", "loss landscape scan over the reflectance parameter b"),
        ("sweep", "epsilon stability sweep with log-linear regression"),
        ("decompose", "ballistic/scattering measurement decomposition"),
        ("reconstruct", "gradient-descent recovery of the tanh parameters"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON run configuration (defaults used when omitted)")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory (default runs/<command>)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes for independent forward runs")
        p.add_argument("--seed", type=int, default=0,
                       help="RNG seed (used by the data-noise flag only)")
        p.add_argument("--strict", action="store_true",
                       help="instrumented runs; exit 4 on any invariant violation")
        p.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    out_dir = args.out if args.out is not None else Path("runs") / args.command
    try:
        return run_experiment(args.command, args.config, out_dir, jobs=args.jobs,
                              seed=args.seed, strict=args.strict)
    except (ConfigError, InterfaceCoefficientError, MaterialValidationError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except StrictViolation as exc:
        log.error("strict-mode violation: %s", exc)
        return EXIT_STRICT
    except ReconstructionDiverged as exc:
        log.error("%s (trajectory length %d)", exc, len(exc.trajectory))
        return EXIT_SOLVER
    except (SolverError, FloatingPointError) as exc:
        log.error("solver error: %s", exc)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
