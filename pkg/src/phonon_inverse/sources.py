"""Inflow sources, measurement test functions, and reflectance models.

The smooth source is a product of compactly supported bumps,

    phi(t, mu, omega) = (1/(theta_mu*theta_omega*theta_t))
        * b(t/theta_t) * b((mu - mu0)/theta_mu) * b((omega - omega0)/theta_omega),

with b the unit-mass bump exp(-1/(y(1-y))) on (0, 1).  The grid-delta source
concentrates unit mass on a single (mu, omega) node during the first time
step, with amplitude 1/(dmu*domega*dt).

The measurement test function is psi(t) = psi_t((t - t1)/theta) centered at
the ballistic round-trip time t1 = 2*x_max*eps/(mu0*nu(omega0)); psi_t is the
same bump recentred to (-1, 1) (unit integral).  A grid-delta psi reads the
trace at the sample nearest t1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "bump",
    "bump_cell_mean",
    "psi_bump",
    "eta_tanh",
    "ReflectionModel",
    "SourceSpec",
    "TestFunctionSpec",
    "round_trip_time",
]


def _raw_bump(y):
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    inside = (y > 0.0) & (y < 1.0)
    yi = y[inside]
    out[inside] = np.exp(-1.0 / (yi * (1.0 - yi)))
    return out


def _gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


_GL_X, _GL_W = _gauss_legendre_01(200)
#: integral of exp(-1/(y(1-y))) over (0, 1); fixed quadrature, deterministic
BUMP_MASS = float(np.sum(_GL_W * _raw_bump(_GL_X)))


def bump(y):
    """Smooth cutoff bump on (0, 1), normalized to unit integral."""
    return _raw_bump(y) / BUMP_MASS


def psi_bump(y):
    """The same bump recentred to (-1, 1), unit integral."""
    y = np.asarray(y, dtype=np.float64)
    return 0.5 * bump(0.5 * (y + 1.0))


def bump_cell_mean(lo, hi) -> np.ndarray:
    """Mean of the normalized bump over cells [lo_i, hi_i].

    Used to sample narrow bumps onto coarse node grids without losing mass:
    the cell means integrate to the exact bump mass inside the sampled range.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
    x8, w8 = _gauss_legendre_01(16)
    width = hi - lo
    pts = lo[:, None] + width[:, None] * x8[None, :]
    vals = bump(pts)
    return vals @ w8


def eta_tanh(omega, a: float, b: float):
    """Two-knee reflectance profile, clamped to [0, 1].

        eta(omega) = 0.25*tanh(10*(omega - a)) - 0.25*tanh(2*(omega - b)) + 0.5
    """
    omega = np.asarray(omega, dtype=np.float64)
    val = 0.25 * np.tanh(10.0 * (omega - a)) - 0.25 * np.tanh(2.0 * (omega - b)) + 0.5
    return np.clip(val, 0.0, 1.0)


@dataclass(frozen=True)
class ReflectionModel:
    """Reflectance eta(omega), tanh-parametrized by (a, b) or tabulated.

    Evaluations are clamped to [0, 1] so the solver's boundary update stays a
    convex combination.
    """

    kind: str = "tanh"
    a: float = 1.5
    b: float = 1.0
    table_omega: np.ndarray | None = None
    table_eta: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("tanh", "table"):
            raise ValueError(f"eta.kind must be 'tanh' or 'table', got {self.kind!r}")
        if self.kind == "table":
            if self.table_omega is None or self.table_eta is None:
                raise ValueError("tabulated reflectance needs table_omega and table_eta")
            object.__setattr__(self, "table_omega", np.asarray(self.table_omega, dtype=np.float64))
            object.__setattr__(self, "table_eta", np.asarray(self.table_eta, dtype=np.float64))

    def values(self, omega):
        omega = np.asarray(omega, dtype=np.float64)
        if self.kind == "tanh":
            return eta_tanh(omega, self.a, self.b)
        return np.clip(np.interp(omega, self.table_omega, self.table_eta), 0.0, 1.0)

    def value(self, omega0: float) -> float:
        return float(self.values(np.asarray([omega0]))[0])

    def describe(self) -> dict:
        if self.kind == "tanh":
            return {"kind": "tanh", "a": self.a, "b": self.b}
        return {
            "kind": "table",
            "n_points": int(len(self.table_omega)),
        }


@dataclass(frozen=True)
class SourceSpec:
    """Inflow source description.

    kind "smooth": product-of-bumps source centered at (mu0, omega0) with
    widths (theta_t, theta_mu, theta_omega); ``sampling`` selects pointwise
    node evaluation ("point") or per-cell bump means ("cell_mean", default;
    mass-exact even when a width falls under the grid spacing).

    kind "grid_delta": a grid delta on the single ordinate nearest mu0 and
    one omega node, active at the t = 0 time node only.  The boundary value
    is amplitude/(dmu*domega) during the first step (a Kronecker delta in
    time), so the injected time-integral scales with dt; this is the
    convention under which the trace-difference magnitudes grow monotonically
    with epsilon at the reference resolutions.

    kind "constant": steady inflow ``amplitude * values(omega)`` on every
    incoming ordinate (the equilibrium-preservation probe; not used by the
    measurement experiments).
    """

    kind: str = "grid_delta"
    mu0: float = 0.935
    omega0: float | None = None
    omega_index: int | None = None
    theta_t: float = 0.1
    theta_mu: float = 0.1
    theta_omega: float = 0.1
    sampling: str = "cell_mean"
    amplitude: float = 1.0
    values: np.ndarray | float = 1.0

    def __post_init__(self):
        if self.kind not in ("smooth", "grid_delta", "constant"):
            raise ValueError(
                f"source.kind must be 'smooth', 'grid_delta' or 'constant', got {self.kind!r}"
            )
        if self.kind == "constant":
            return
        if not 0.0 < self.mu0 <= 1.0:
            raise ValueError(f"source mu0={self.mu0!r} must lie in (0, 1]")
        if self.kind == "smooth":
            for name in ("theta_t", "theta_mu", "theta_omega"):
                if getattr(self, name) <= 0.0:
                    raise ValueError(f"source {name} must be positive")
            if self.omega0 is None:
                raise ValueError("smooth source needs omega0")
            if self.mu0 + self.theta_mu > 1.0 + 1e-12:
                raise ValueError(
                    f"smooth source support [mu0, mu0+theta_mu]=[{self.mu0}, "
                    f"{self.mu0 + self.theta_mu}] must stay inside (0, 1]"
                )
            if self.sampling not in ("cell_mean", "point"):
                raise ValueError(f"source.sampling must be 'cell_mean' or 'point', got {self.sampling!r}")

    # -- solver-facing sampling ------------------------------------------------

    def resolve_nodes(self, grid) -> dict:
        """Snap the source onto a grid; returns node indices and factor tables.

        The returned dict carries the per-node mu factors ``pmu`` (zero on
        incoming-negative ordinates) and omega factors ``pom`` such that the
        boundary inflow at time t is ``time_factor(t) * outer(pmu, pom)``.
        """
        mu_idx, mu_snapped = grid.snap_mu(self.mu0)
        pmu = np.zeros(grid.n_mu)
        pom = np.zeros(grid.n_omega)
        if self.kind == "constant":
            pmu[grid.half:] = 1.0
            pom[:] = self.amplitude * (np.ones(grid.n_omega) * self.values)
            return {
                "mu_index": mu_idx,
                "mu_snapped": mu_snapped,
                "omega_index": 0,
                "omega_value": float(grid.omega_nodes[0]),
                "pmu": pmu,
                "pom": pom,
            }
        if self.kind == "grid_delta":
            if self.omega_index is not None:
                om_idx = int(self.omega_index)
                if not 0 <= om_idx < grid.n_omega:
                    raise ValueError(f"omega_index {om_idx} outside grid with {grid.n_omega} nodes")
            elif self.omega0 is not None:
                om_idx = grid.omega_index(self.omega0)
            else:
                raise ValueError("grid_delta source needs omega_index or omega0")
            pmu[mu_idx] = 1.0 / grid.mu_weights[mu_idx]
            pom[om_idx] = 1.0 / grid.omega_weights[om_idx]
            return {
                "mu_index": mu_idx,
                "mu_snapped": mu_snapped,
                "omega_index": om_idx,
                "omega_value": float(grid.omega_nodes[om_idx]),
                "pmu": pmu,
                "pom": pom,
            }
        # smooth: factor tables per node, pointwise or cell-mean
        if self.sampling == "point":
            pmu = bump((grid.mu_nodes - self.mu0) / self.theta_mu) / self.theta_mu
            pom = bump((grid.omega_nodes - self.omega0) / self.theta_omega) / self.theta_omega
        else:
            mu_lo = (grid.mu_nodes - 0.5 * grid.mu_weights - self.mu0) / self.theta_mu
            mu_hi = (grid.mu_nodes + 0.5 * grid.mu_weights - self.mu0) / self.theta_mu
            pmu = bump_cell_mean(mu_lo, mu_hi) / self.theta_mu
            om_lo = (grid.omega_nodes - 0.5 * grid.omega_weights - self.omega0) / self.theta_omega
            om_hi = (grid.omega_nodes + 0.5 * grid.omega_weights - self.omega0) / self.theta_omega
            pom = bump_cell_mean(om_lo, om_hi) / self.theta_omega
        pmu[: grid.half] = 0.0  # inflow is prescribed on mu > 0 only
        return {
            "mu_index": mu_idx,
            "mu_snapped": mu_snapped,
            "omega_index": grid.omega_index(self.omega0),
            "omega_value": self.omega0,
            "pmu": pmu * self.amplitude,
            "pom": pom,
        }

    def time_factor(self, t: float, dt: float) -> float:
        """Time factor of the inflow at the start of the step [t, t+dt)."""
        if self.kind == "constant":
            return 1.0
        if self.kind == "grid_delta":
            return self.amplitude if 0.0 <= t < dt else 0.0
        return float(bump(np.asarray(t / self.theta_t)) / self.theta_t)

    def time_profile(self, t, dt: float):
        """Vectorized continuous-time inflow factor (matches ``time_factor``
        at step starts)."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "constant":
            return np.where(t >= 0.0, 1.0, 0.0)
        if self.kind == "grid_delta":
            return np.where((t >= 0.0) & (t < dt), self.amplitude, 0.0)
        return bump(t / self.theta_t) / self.theta_t

    # -- continuum evaluation (ballistic oracle) -------------------------------

    def phi(self, t, mu, omega, grid=None):
        """Pointwise continuum source phi(t, mu, omega); broadcasts over t.

        For grid_delta sources the time indicator spans the first step, so a
        bound grid is required.
        """
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "constant":
            if mu <= 0.0:
                return np.zeros_like(t)
            if np.isscalar(self.values):
                val = self.amplitude * float(self.values)
            elif grid is not None:
                val = self.amplitude * float(np.interp(omega, grid.omega_nodes,
                                                       np.asarray(self.values)))
            else:
                raise ValueError("array-valued constant source needs the grid")
            return np.where(t >= 0.0, val, 0.0)
        if self.kind == "smooth":
            return (
                self.amplitude
                * bump(t / self.theta_t) / self.theta_t
                * float(bump(np.asarray((mu - self.mu0) / self.theta_mu))) / self.theta_mu
                * float(bump(np.asarray((omega - self.omega0) / self.theta_omega))) / self.theta_omega
            )
        if grid is None:
            raise ValueError("grid_delta source needs the grid to evaluate phi")
        nodes = self.resolve_nodes(grid)
        hit_mu = abs(mu - nodes["mu_snapped"]) < 1e-12
        hit_om = abs(omega - nodes["omega_value"]) < 1e-12
        if not (hit_mu and hit_om):
            return np.zeros_like(t)
        amp = self.amplitude / (
            grid.mu_weights[nodes["mu_index"]] * grid.omega_weights[nodes["omega_index"]]
        )
        return np.where((t >= 0.0) & (t < grid.dt), amp, 0.0)

    def describe(self) -> dict:
        d = {"kind": self.kind, "mu0": self.mu0, "amplitude": self.amplitude}
        if self.kind == "smooth":
            d.update(
                omega0=self.omega0,
                theta_t=self.theta_t,
                theta_mu=self.theta_mu,
                theta_omega=self.theta_omega,
                sampling=self.sampling,
            )
        else:
            d.update(omega_index=self.omega_index, omega0=self.omega0)
        return d


def round_trip_time(x_max: float, epsilon: float, mu0: float, nu0: float) -> float:
    """Arrival time of the boundary-reflected pulse back at the surface."""
    return 2.0 * x_max * epsilon / (mu0 * nu0)


@dataclass(frozen=True)
class TestFunctionSpec:
    """Measurement test function centered at the round-trip time t1.

    kind "smooth": psi(t) = psi_t((t - t1)/theta) with the recentred bump;
    kind "grid_delta": the trace sample nearest t1.
    """

    __test__ = False  # not a pytest class, despite the name

    kind: str = "grid_delta"
    theta: float = 0.1
    t1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("smooth", "grid_delta"):
            raise ValueError(f"test_function.kind must be 'smooth' or 'grid_delta', got {self.kind!r}")
        if self.kind == "smooth" and self.theta <= 0.0:
            raise ValueError("test_function theta must be positive")

    def with_t1(self, t1: float) -> "TestFunctionSpec":
        return TestFunctionSpec(kind=self.kind, theta=self.theta, t1=t1)

    def window(self) -> tuple[float, float]:
        if self.kind == "grid_delta":
            return self.t1, self.t1
        return self.t1 - self.theta, self.t1 + self.theta

    def psi(self, t):
        if self.kind != "smooth":
            raise ValueError("grid_delta test functions have no pointwise psi")
        return psi_bump((np.asarray(t, dtype=np.float64) - self.t1) / self.theta)

    def describe(self) -> dict:
        d = {"kind": self.kind, "t1": self.t1}
        if self.kind == "smooth":
            d["theta"] = self.theta
        return d
