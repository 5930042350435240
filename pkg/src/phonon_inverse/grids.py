"""Discretization of (x, mu, omega, t) and the discrete moment functional.

Layout conventions used throughout the solver:

* x: ``nx`` uniform cells on [x_min, x_max], unknowns at cell centers.
* mu: cell-centered ordinates +-(k - 1/2)*dmu on [-1, 1], stored ascending,
  so index ``m`` mirrors to ``n_mu - 1 - m`` and no ordinate sits at mu = 0.
* omega: nodes omega_i = omega_min + (i-1)*domega with rectangle weights.
* t: Delta_t fixed per run by the grid's dt rule.

The moment <.> is the quadrature sum over (mu, omega) with these weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PhaseSpaceGrid",
    "DistributionField",
    "build_paper_grid",
    "build_desk_grid",
    "build_grid",
    "moment",
]

# Reproduction-mode grid parameters: domega=0.05 on [0.05, 2] (40 nodes),
# dmu=0.01 (200 ordinates), dx = min{0.004, eps/125}, dt = min{eps*dx/2, eps^2}.
PAPER_OMEGA_MIN = 0.05
PAPER_OMEGA_MAX = 2.0
PAPER_N_OMEGA = 40
PAPER_N_MU = 200
PAPER_DX_CAP = 0.004
PAPER_DX_RATIO = 125.0

# Desk-scale presets: Nomega=10 (domega=0.2), Nmu=40, dx = min{0.01, eps/25}.
DESK_N_OMEGA = 10
DESK_N_MU = 40
DESK_DX_CAP = 0.01
DESK_DX_RATIO = 25.0


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Immutable discrete phase space; safe to share across runs."""

    x_min: float
    x_max: float
    nx: int
    dx: float
    mu_nodes: np.ndarray
    mu_weights: np.ndarray
    omega_nodes: np.ndarray
    omega_weights: np.ndarray
    dt: float
    dt_rule: str = "paper"

    def __post_init__(self):
        for name in ("mu_nodes", "mu_weights", "omega_nodes", "omega_weights"):
            object.__setattr__(
                self, name, np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            )
        self.validate()

    def validate(self):
        mu, wmu = self.mu_nodes, self.mu_weights
        if abs(float(wmu.sum()) - 2.0) > 1e-12:
            raise ValueError(f"mu weights must sum to 2 (length of [-1,1]), got {wmu.sum()!r}")
        if (wmu <= 0.0).any():
            raise ValueError("all mu weights must be positive")
        if (mu == 0.0).any():
            raise ValueError("mu ordinates must exclude 0")
        if not np.allclose(mu, -mu[::-1], rtol=0.0, atol=1e-14):
            raise ValueError("mu ordinates must be symmetric about 0")
        om = self.omega_nodes
        if (om <= 0.0).any() or (np.diff(om) <= 0.0).any():
            raise ValueError("omega nodes must be strictly increasing and positive")
        if self.nx < 1 or self.dx <= 0.0 or self.dt <= 0.0:
            raise ValueError(
                f"invalid x/t discretization: nx={self.nx}, dx={self.dx!r}, dt={self.dt!r}"
            )

    @property
    def n_mu(self) -> int:
        return len(self.mu_nodes)

    @property
    def n_omega(self) -> int:
        return len(self.omega_nodes)

    @property
    def half(self) -> int:
        """Index of the first positive ordinate (negatives occupy [0, half))."""
        return self.n_mu // 2

    @property
    def x_centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    def mirror_index(self, m: int) -> int:
        """Ordinate index of -mu_nodes[m]; exact by the symmetric layout."""
        return self.n_mu - 1 - m

    def snap_mu(self, mu0: float) -> tuple[int, float]:
        """Snap a direction cosine to the nearest positive ordinate.

        Ties between two equidistant ordinates resolve to the lower one.
        Returns (index, snapped value).
        """
        pos = self.mu_nodes[self.half:]
        dist = np.abs(pos - mu0)
        best = np.flatnonzero(dist == dist.min())[0]  # first hit = lower ordinate
        return int(self.half + best), float(pos[best])

    def omega_index(self, omega0: float) -> int:
        """Index of the omega node nearest omega0."""
        return int(np.argmin(np.abs(self.omega_nodes - omega0)))

    def fingerprint(self) -> dict:
        """Stable summary of the grid for run manifests."""
        import hashlib

        h = hashlib.sha256()
        for arr in (self.mu_nodes, self.mu_weights, self.omega_nodes, self.omega_weights):
            h.update(arr.tobytes())
        h.update(np.asarray([self.x_min, self.x_max, self.dx, self.dt], dtype=np.float64).tobytes())
        return {
            "nx": self.nx,
            "n_mu": self.n_mu,
            "n_omega": self.n_omega,
            "dx": self.dx,
            "dt": self.dt,
            "x_range": [self.x_min, self.x_max],
            "omega_range": [float(self.omega_nodes[0]), float(self.omega_nodes[-1])],
            "sha256": h.hexdigest(),
        }


@dataclass
class DistributionField:
    """Deviational energy density sampled on (x, mu, omega) at one time level.

    Owned by exactly one solver run; never shared mutably.
    """

    values: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, grid: PhaseSpaceGrid, t: float = 0.0) -> "DistributionField":
        return cls(values=np.zeros((grid.nx, grid.n_mu, grid.n_omega)), t=t)

    def check_finite(self):
        if not np.isfinite(self.values).all():
            i = np.unravel_index(int(np.flatnonzero(~np.isfinite(self.values))[0]), self.values.shape)
            raise FloatingPointError(
                f"non-finite field value at (x-cell={i[0]}, mu-node={i[1]}, omega-node={i[2]}, "
                f"t={self.t!r})"
            )


def _cell_centered_mu(n_mu: int) -> tuple[np.ndarray, np.ndarray]:
    if n_mu < 2 or n_mu % 2:
        raise ValueError(f"n_mu must be even and >= 2, got {n_mu}")
    dmu = 2.0 / n_mu
    # build the positive half and mirror it, so mu -> -mu is exact on nodes
    pos = (np.arange(n_mu // 2) + 0.5) * dmu
    nodes = np.concatenate([-pos[::-1], pos])
    return nodes, np.full(n_mu, dmu)


def _uniform_omega(omega_min: float, omega_max: float, n_omega: int) -> tuple[np.ndarray, np.ndarray]:
    if n_omega < 1 or omega_min <= 0 or omega_max <= omega_min and n_omega > 1:
        raise ValueError(f"bad omega grid: [{omega_min}, {omega_max}] with {n_omega} nodes")
    if n_omega == 1:
        return np.asarray([omega_min]), np.asarray([omega_max - omega_min if omega_max > omega_min else 1.0])
    domega = (omega_max - omega_min) / (n_omega - 1)
    nodes = omega_min + domega * np.arange(n_omega)
    return nodes, np.full(n_omega, domega)


def _dt_paper(epsilon: float, dx: float) -> float:
    return min(epsilon * dx / 2.0, epsilon * epsilon)


def _dt_cfl(epsilon: float, dx: float, nu_max: float, safety: float = 1.0) -> float:
    return safety * epsilon * dx / nu_max


def build_grid(
    epsilon: float,
    x_min: float = 0.0,
    x_max: float = 0.5,
    n_mu: int = PAPER_N_MU,
    omega_min: float = PAPER_OMEGA_MIN,
    omega_max: float = PAPER_OMEGA_MAX,
    n_omega: int = PAPER_N_OMEGA,
    dx_cap: float = PAPER_DX_CAP,
    dx_ratio: float = PAPER_DX_RATIO,
    dt_rule: str = "paper",
    nu_max: float = 2.0,
    dt_safety: float = 1.0,
    dt_override: float | None = None,
) -> PhaseSpaceGrid:
    """General grid builder: dx = min{dx_cap, eps/dx_ratio}, cells snapped to
    an integer count, and dt from the named rule (or an explicit override)."""
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    dx_target = min(dx_cap, epsilon / dx_ratio)
    nx = max(1, round((x_max - x_min) / dx_target))
    if nx > 5_000_000:
        raise ValueError(
            f"x resolution asks for {nx} cells (dx_cap={dx_cap!r}, dx_ratio={dx_ratio!r}); "
            "check the dx parameters"
        )
    dx = (x_max - x_min) / nx
    if dt_override is not None:
        dt = float(dt_override)
    elif dt_rule == "paper":
        dt = _dt_paper(epsilon, dx)
    elif dt_rule == "cfl":
        dt = _dt_cfl(epsilon, dx, nu_max, dt_safety)
    else:
        raise ValueError(f"unknown dt_rule {dt_rule!r}")
    mu_nodes, mu_weights = _cell_centered_mu(n_mu)
    omega_nodes, omega_weights = _uniform_omega(omega_min, omega_max, n_omega)
    return PhaseSpaceGrid(
        x_min=x_min, x_max=x_max, nx=nx, dx=dx,
        mu_nodes=mu_nodes, mu_weights=mu_weights,
        omega_nodes=omega_nodes, omega_weights=omega_weights,
        dt=dt, dt_rule=dt_rule if dt_override is None else "override",
    )


def build_paper_grid(epsilon: float, x_max: float = 0.5) -> PhaseSpaceGrid:
    """Reproduction-mode grid at full resolution."""
    return build_grid(epsilon, x_max=x_max)


def build_desk_grid(epsilon: float, x_max: float = 0.5) -> PhaseSpaceGrid:
    """Reduced desk-scale grid for laptop-budget experiments."""
    return build_grid(
        epsilon,
        x_max=x_max,
        n_mu=DESK_N_MU,
        omega_min=0.2,
        omega_max=2.0,
        n_omega=DESK_N_OMEGA,
        dx_cap=DESK_DX_CAP,
        dx_ratio=DESK_DX_RATIO,
    )


def moment(field_slice: np.ndarray, grid: PhaseSpaceGrid, weight=None) -> float:
    """Discrete moment <weight * field> over one (mu, omega) slice.

    ``weight`` may be None (unit weight), an (n_mu, n_omega) array, or a
    callable weight(mu, omega) evaluated on the node mesh.  Linear in the
    field argument.
    """
    if callable(weight):
        mu2, om2 = np.meshgrid(grid.mu_nodes, grid.omega_nodes, indexing="ij")
        w = np.asarray(weight(mu2, om2), dtype=np.float64)
    elif weight is None:
        w = np.ones((grid.n_mu, grid.n_omega))
    else:
        w = np.asarray(weight, dtype=np.float64)
    if not np.isfinite(w).all():
        raise ValueError("moment weight must be finite on all nodes")
    return float(
        np.einsum("m,w,mw,mw->", grid.mu_weights, grid.omega_weights, w, field_slice, optimize=True)
    )
