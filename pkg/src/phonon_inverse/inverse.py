"""Measurement operator, measurement functionals, loss, and the experiment
drivers: landscape scans over the reflectance parameters, the epsilon
stability sweep, and a plain gradient-descent reconstruction loop.

The forward map runs the kinetic solver and reads the surface temperature
trace; the measurement functional projects the trace onto a test function
centered at the ballistic round-trip time.  All experiment drivers are
deterministic: parallel jobs are keyed and aggregated in a fixed order, so
results are independent of worker scheduling.
"""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .grids import PhaseSpaceGrid
from .materials import MaterialModel
from .solver import SolverConfig, SolverRun, solve
from .sources import ReflectionModel, SourceSpec, TestFunctionSpec, round_trip_time

__all__ = [
    "MeasurementRecord",
    "MeasurementWindowError",
    "ExperimentSetup",
    "measurement_operator",
    "measurement_functional",
    "forward_functionals",
    "loss",
    "landscape_scan",
    "stability_sweep",
    "reconstruct",
    "ols_log_regression",
]


class MeasurementWindowError(ValueError):
    """The test window does not fit inside the recorded trace."""


@dataclass
class MeasurementRecord:
    """Surface trace plus the measurement functional matrix of one experiment."""

    times: np.ndarray
    trace: np.ndarray
    functionals: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.trace = np.asarray(self.trace, dtype=np.float64)
        if self.times.shape != self.trace.shape:
            raise ValueError("trace and times must have matching shapes")
        if (np.diff(self.times) <= 0.0).any():
            raise ValueError("trace times must be strictly increasing")


def measurement_functional(times: np.ndarray, trace: np.ndarray,
                           test_fn: TestFunctionSpec) -> float:
    """Project a trace onto the test function.

    Smooth psi: trapezoid quadrature of trace * psi over the recorded times.
    Grid-delta psi: the trace sample nearest t1.  Linear in the trace and in
    psi.

    Raises
    ------
    MeasurementWindowError
        If the test window [t1 - theta, t1 + theta] escapes the trace.
    """
    times = np.asarray(times, dtype=np.float64)
    trace = np.asarray(trace, dtype=np.float64)
    lo, hi = test_fn.window()
    if lo < times[0] - 1e-12 or hi > times[-1] + 1e-12:
        raise MeasurementWindowError(
            f"test window [{lo!r}, {hi!r}] escapes the trace "
            f"(t1={test_fn.t1!r}, theta={getattr(test_fn, 'theta', 0.0)!r}, "
            f"t_stop={float(times[-1])!r})"
        )
    if test_fn.kind == "grid_delta":
        idx = int(np.argmin(np.abs(times - test_fn.t1)))
        return float(trace[idx])
    return float(np.trapezoid(trace * test_fn.psi(times), times))


@dataclass
class ExperimentSetup:
    """Shared plumbing for one experiment: scaling, grids, source family.

    ``source_template`` is a SourceSpec whose omega center is re-targeted per
    experiment source i; ``test_template`` supplies the psi kind/width, with
    t1 recomputed per source from the round-trip time at the snapped
    ordinate.
    """

    epsilon: float
    grid: PhaseSpaceGrid
    material: MaterialModel
    x_max: float
    source_template: SourceSpec
    test_template: TestFunctionSpec
    source_indices: tuple = ()  # empty = every omega node
    t_margin: float = 1.5
    t_stop_override: float | None = None
    solver_opts: dict = field(default_factory=dict)

    def indices(self) -> tuple:
        if self.source_indices:
            return tuple(self.source_indices)
        return tuple(range(self.grid.n_omega))

    def source_for(self, index: int) -> SourceSpec:
        omega_i = float(self.grid.omega_nodes[index])
        if self.source_template.kind == "grid_delta":
            return replace(self.source_template, omega_index=index, omega0=omega_i)
        return replace(self.source_template, omega0=omega_i)

    def t1_for(self, source: SourceSpec) -> float:
        if source.kind == "grid_delta":
            _, mu_eff = self.grid.snap_mu(source.mu0)
            nodes = source.resolve_nodes(self.grid)
            nu0 = float(self.material.nu[nodes["omega_index"]])
        else:
            mu_eff = source.mu0
            nu0 = float(np.interp(source.omega0, self.grid.omega_nodes, self.material.nu))
        return round_trip_time(self.x_max, self.epsilon, mu_eff, nu0)

    def test_for(self, source: SourceSpec) -> TestFunctionSpec:
        return self.test_template.with_t1(self.t1_for(source))

    def t_stop_for(self, source: SourceSpec) -> float:
        if self.t_stop_override is not None:
            return self.t_stop_override
        t1 = self.t1_for(source)
        if self.test_template.kind == "smooth":
            return t1 + self.t_margin * self.test_template.theta
        return self.t_margin * t1

    def solver_config(self, eta: ReflectionModel, source: SourceSpec) -> SolverConfig:
        return SolverConfig(
            epsilon=self.epsilon,
            eta=eta,
            source=source,
            t_stop=self.t_stop_for(source),
            keep_final_field=False,
            **self.solver_opts,
        )


def measurement_operator(eta: ReflectionModel, epsilon: float, source: SourceSpec,
                         grid: PhaseSpaceGrid, material: MaterialModel, t_stop: float,
                         **solver_opts) -> SolverRun:
    """Forward map: run the solver, return the surface-trace record."""
    config = SolverConfig(
        epsilon=epsilon, eta=eta, source=source, t_stop=t_stop, keep_final_field=False,
        **solver_opts,
    )
    return solve(config, grid, material)


# -- job-level helpers (module level so worker processes can import them) ------

def _run_source(setup: ExperimentSetup, eta: ReflectionModel, index: int) -> SolverRun:
    source = setup.source_for(index)
    return solve(setup.solver_config(eta, source), setup.grid, setup.material)


def _functional_job(args):
    setup, eta, index = args
    run = _run_source(setup, eta, index)
    source = setup.source_for(index)
    m = measurement_functional(run.times, run.trace, setup.test_for(source))
    return index, m


def _trace_job(args):
    setup, eta, index = args
    run = _run_source(setup, eta, index)
    return index, run.times, run.trace


def _map_jobs(fn, payloads, jobs: int):
    """Run payloads through fn, optionally across processes; order-stable.

    Workers are spawned (not forked): the solver kernels hold JIT state that
    does not survive a fork.  Results are identical either way; the map
    preserves payload order.
    """
    if jobs <= 1 or len(payloads) <= 1:
        return [fn(p) for p in payloads]
    ctx = multiprocessing.get_context("spawn")
    with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as pool:
        return list(pool.map(fn, payloads))


def forward_functionals(setup: ExperimentSetup, eta: ReflectionModel, jobs: int = 1) -> np.ndarray:
    """Measurement functional column d[i] over the experiment's sources (J=1)."""
    payloads = [(setup, eta, i) for i in setup.indices()]
    results = dict(_map_jobs(_functional_job, payloads, jobs))
    return np.asarray([[results[i]] for i in setup.indices()])


def loss(eta: ReflectionModel, data: np.ndarray, setup: ExperimentSetup, jobs: int = 1) -> float:
    """Mean squared measurement mismatch over all (source i, test j) pairs."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    m = forward_functionals(setup, eta, jobs=jobs)
    if m.shape != data.shape:
        raise ValueError(f"data shape {data.shape} does not match functionals {m.shape}")
    return float(np.mean(np.abs(m - data) ** 2))


def landscape_scan(a_fixed: float, b_range: tuple, n_points: int, setup: ExperimentSetup,
                   data: np.ndarray, jobs: int = 1) -> list:
    """Loss along b in [b_lo, b_hi] at fixed a; returns [(b, loss), ...]."""
    lo, hi = float(b_range[0]), float(b_range[1])
    if not (hi > lo and n_points >= 2):
        raise ValueError(f"bad scan range {b_range!r} with {n_points} points")
    bs = np.linspace(lo, hi, int(n_points))
    rows = []
    for b in bs:
        rows.append((float(b), loss(ReflectionModel(kind="tanh", a=a_fixed, b=float(b)),
                                    data, setup, jobs=jobs)))
    return rows


def ols_log_regression(inv_eps: np.ndarray, log_vals: np.ndarray) -> dict:
    """Ordinary least squares of log(max diff) against 1/epsilon, with Pearson r."""
    x = np.asarray(inv_eps, dtype=np.float64)
    y = np.asarray(log_vals, dtype=np.float64)
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    r = float(np.corrcoef(x, y)[0, 1])
    return {"slope": slope, "intercept": intercept, "r": r, "skipped": False}


def stability_sweep(eta1: ReflectionModel, eta2: ReflectionModel, epsilon_list,
                    setup_for_epsilon, jobs: int = 1, trace_stride: int = 1) -> dict:
    """Max trace difference between two reflectances across an epsilon list.

    For each epsilon: every source runs under both reflectances on identical
    time grids; the row records max over (source, t) of |trace1 - trace2|.
    The fit regresses log(max_diff) on 1/epsilon (natural log; slope is
    comparable to physical decay exponents).

    ``setup_for_epsilon`` maps epsilon -> ExperimentSetup.  Returns rows,
    the regression dict, per-run trace records for the (omega_i, t) maps,
    and the reflectance curves on the omega grid.
    """
    epsilon_list = [float(e) for e in epsilon_list]
    if len(epsilon_list) < 3:
        raise ValueError(f"stability sweep needs >= 3 epsilon values, got {len(epsilon_list)}")
    rows = []
    lambda_records = []
    floored = []
    for eps in epsilon_list:
        setup = setup_for_epsilon(eps)
        payloads = [(setup, eta, i) for eta in (eta1, eta2) for i in setup.indices()]
        results = _map_jobs(_trace_job, payloads, jobs)
        n = len(setup.indices())
        max_diff = 0.0
        for pos, i in enumerate(setup.indices()):
            idx1, t1_ax, tr1 = results[pos]
            idx2, _, tr2 = results[n + pos]
            assert idx1 == idx2 == i
            max_diff = max(max_diff, float(np.abs(tr1 - tr2).max()))
            omega_i = float(setup.grid.omega_nodes[i])
            for run_id, tr in (("eta1", tr1), ("eta2", tr2)):
                sl = slice(None, None, max(1, trace_stride))
                lambda_records.append((eps, omega_i, t1_ax[sl], tr[sl], run_id))
        rows.append({"epsilon": eps, "inv_epsilon": 1.0 / eps, "max_diff": max_diff})

    diffs = np.asarray([r["max_diff"] for r in rows])
    if (diffs == 0.0).all():
        regression = {"slope": 0.0, "intercept": 0.0, "r": 0.0, "skipped": True,
                      "reason": "all trace differences are zero (identical reflectances?)"}
        for r in rows:
            r["log_max_diff"] = float(np.log(np.finfo(float).eps))
    else:
        vals = diffs.copy()
        for k, v in enumerate(vals):
            if v == 0.0:
                vals[k] = np.finfo(float).eps
                floored.append(rows[k]["epsilon"])
        logs = np.log(vals)
        for r, lg in zip(rows, logs):
            r["log_max_diff"] = float(lg)
        regression = ols_log_regression([r["inv_epsilon"] for r in rows], logs)
        if floored:
            regression["floored_epsilons"] = floored
    return {"rows": rows, "regression": regression, "lambda_records": lambda_records}


class ReconstructionDiverged(RuntimeError):
    """Loss increased for too many consecutive steps; carries the trajectory."""

    def __init__(self, trajectory):
        self.trajectory = trajectory
        super().__init__("reconstruction diverged (loss increased 5 steps in a row)")


def reconstruct(initial_ab: tuple, data: np.ndarray, setup: ExperimentSetup,
                lr: float = 40.0, max_iters: int = 60, grad_tol: float = 1e-12,
                fd_rel_step: float = 1e-3, divergence_patience: int = 5,
                loss_floor: float = 0.0, jobs: int = 1) -> dict:
    """Plain gradient descent on the loss over the tanh parameters (a, b).

    Gradients are central finite differences with relative step
    ``fd_rel_step`` per parameter.  The learning rate is fixed on purpose:
    progress per iteration is proportional to the gradient magnitude, which
    is exactly the conditioning property the experiment measures (a flat
    landscape stalls instead of being rescued by a line search).

    Returns {"trajectory": [(iter, a, b, loss, grad_norm)], "status", "a", "b"}.
    """
    a, b = float(initial_ab[0]), float(initial_ab[1])

    def loss_at(aa: float, bb: float) -> float:
        return loss(ReflectionModel(kind="tanh", a=aa, b=bb), data, setup, jobs=jobs)

    trajectory = []
    current = loss_at(a, b)
    increases = 0
    status = "max_iters"
    for it in range(max_iters + 1):
        if current <= loss_floor:
            trajectory.append((it, a, b, current, 0.0))
            status = "converged"
            break
        ha = fd_rel_step * max(abs(a), 1e-6)
        hb = fd_rel_step * max(abs(b), 1e-6)
        ga = (loss_at(a + ha, b) - loss_at(a - ha, b)) / (2.0 * ha)
        gb = (loss_at(a, b + hb) - loss_at(a, b - hb)) / (2.0 * hb)
        gnorm = float(np.hypot(ga, gb))
        trajectory.append((it, a, b, current, gnorm))
        if gnorm < grad_tol:
            status = "converged"
            break
        if it == max_iters:
            break
        a -= lr * ga
        b -= lr * gb
        new_loss = loss_at(a, b)
        if new_loss > current:
            increases += 1
            if increases >= divergence_patience:
                raise ReconstructionDiverged(trajectory)
        else:
            increases = 0
        current = new_loss
    return {"trajectory": trajectory, "status": status, "a": a, "b": b}
