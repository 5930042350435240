"""Frequency-dependent material parameters and interface-coefficient algebra.

A material is described on the discrete frequency grid by three per-node
tables: the group velocity nu(omega), the relaxation time tau(omega), and the
linearization weight c_omega(omega).  The collision closure constant

    C_tau = <C_omega / tau>

is always taken with the *same* quadrature the solver uses for its collision
moments, so the discrete relaxation operator conserves the tau-weighted
energy moment to round-off.

The interface between the two bulk materials carries four coefficients
(eta_t, zeta_t, eta_s, zeta_s).  Requiring zero net energy flux per frequency
plus the detailed-balance condition eta_t + c*zeta_t = 1 reduces them to the
single unknown eta_t; ``reduce_interface_coefficients`` performs that
reduction and rejects physically inconsistent inputs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialModel",
    "InterfaceCoefficients",
    "MaterialValidationError",
    "InterfaceCoefficientError",
    "compute_c_tau",
    "reduce_interface_coefficients",
    "temperature_deviation",
    "load_material_table",
    "material_from_config",
]


class MaterialValidationError(ValueError):
    """A material table violates the boundedness assumptions."""


class InterfaceCoefficientError(ValueError):
    """A derived interface coefficient left [0, 1].

    Attributes
    ----------
    coefficient : str
        Name of the offending coefficient ("zeta_t" | "zeta_s" | "eta_s").
    value : float
        The out-of-range value.
    """

    def __init__(self, coefficient: str, value: float):
        self.coefficient = coefficient
        self.value = value
        super().__init__(
            f"derived interface coefficient {coefficient}={value!r} is outside [0, 1]; "
            "the (eta_t, c, nu_t/nu_s) triple is physically inconsistent"
        )


@dataclass(frozen=True)
class MaterialModel:
    """Per-frequency material tables on the omega grid nodes.

    All quantities are dimensionless (post nondimensionalization).  Instances
    are immutable and safe to share across concurrent solver runs.

    Parameters
    ----------
    nu : ndarray (n_omega,)
        Group velocity at each omega node, all positive and finite.
    tau : ndarray (n_omega,)
        Relaxation time at each omega node, bounded below by ``tau_min``.
    c_omega : ndarray (n_omega,)
        Linearization weight at each omega node, all positive.
    nu_min, nu_max, tau_min : float
        Validation bounds.  Default: derived from the tables.
    nu_prime : ndarray (n_omega,), optional
        d(nu)/d(omega) at the nodes; analytic for power laws, centered
        differences for tabulated data.  Needed only by the asymptotic
        measurement formulas.
    """

    nu: np.ndarray
    tau: np.ndarray
    c_omega: np.ndarray
    nu_min: float = 0.0
    nu_max: float = 0.0
    tau_min: float = 0.0
    nu_prime: np.ndarray | None = None
    label: str = "material"

    def __post_init__(self):
        nu = np.ascontiguousarray(np.atleast_1d(np.asarray(self.nu, dtype=np.float64)))
        tau = np.ascontiguousarray(np.atleast_1d(np.asarray(self.tau, dtype=np.float64)))
        c_omega = np.ascontiguousarray(np.atleast_1d(np.asarray(self.c_omega, dtype=np.float64)))
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "c_omega", c_omega)
        if not (nu.shape == tau.shape == c_omega.shape):
            raise MaterialValidationError(
                f"material tables disagree in length: nu {nu.shape}, tau {tau.shape}, "
                f"c_omega {c_omega.shape}"
            )
        # bounds default to the table extrema when not supplied
        if self.nu_min == 0.0:
            object.__setattr__(self, "nu_min", float(nu.min(initial=np.inf)))
        if self.nu_max == 0.0:
            object.__setattr__(self, "nu_max", float(nu.max(initial=0.0)))
        if self.tau_min == 0.0:
            object.__setattr__(self, "tau_min", float(tau.min(initial=np.inf)))
        self.validate()

    def validate(self):
        """Check the boundedness assumptions node by node.

        Raises ``MaterialValidationError`` naming the first offending omega
        node index.
        """
        if not np.isfinite(self.nu).all():
            raise MaterialValidationError(
                f"nu is not finite at omega node {int(np.flatnonzero(~np.isfinite(self.nu))[0])}"
            )
        if not np.isfinite(self.tau).all():
            raise MaterialValidationError(
                f"tau is not finite at omega node {int(np.flatnonzero(~np.isfinite(self.tau))[0])}"
            )
        if self.tau_min <= 0.0 or (self.tau < self.tau_min).any():
            bad = int(np.flatnonzero(self.tau < max(self.tau_min, 0.0))[0]) if (
                self.tau < max(self.tau_min, 0.0)).any() else int(np.argmin(self.tau))
            raise MaterialValidationError(
                f"relaxation time must satisfy tau >= tau_min > 0; violated at omega node {bad} "
                f"(tau={self.tau[bad]!r}, tau_min={self.tau_min!r})"
            )
        if self.nu_min <= 0.0 or (self.nu < self.nu_min).any() or (self.nu > self.nu_max).any():
            bad = int(np.argmin(self.nu)) if self.nu_min <= 0.0 or (self.nu < self.nu_min).any() \
                else int(np.argmax(self.nu))
            raise MaterialValidationError(
                f"group velocity must satisfy 0 < nu_min <= nu <= nu_max < inf; violated at "
                f"omega node {bad} (nu={self.nu[bad]!r}, bounds=({self.nu_min!r}, {self.nu_max!r}))"
            )
        if (self.c_omega <= 0.0).any():
            bad = int(np.flatnonzero(self.c_omega <= 0.0)[0])
            raise MaterialValidationError(
                f"linearization weight c_omega must be positive; violated at omega node {bad} "
                f"(c_omega={self.c_omega[bad]!r})"
            )

    def nu_prime_at(self, omega0: float, omega_nodes: np.ndarray) -> float:
        """d(nu)/d(omega) at an arbitrary omega0 (interpolated if tabular)."""
        if self.nu_prime is not None:
            return float(np.interp(omega0, omega_nodes, self.nu_prime))
        # centered differences on the grid nodes, one-sided at the ends
        grad = np.gradient(self.nu, omega_nodes)
        return float(np.interp(omega0, omega_nodes, grad))

    def substrate(self, nu_ratio: float = 0.5, tau_ratio: float = 4.0) -> "MaterialModel":
        """Derived substrate material: nu_s = nu_ratio*nu_t, tau_s = tau_ratio*tau_t."""
        nu_p = None if self.nu_prime is None else nu_ratio * self.nu_prime
        return MaterialModel(
            nu=nu_ratio * self.nu,
            tau=tau_ratio * self.tau,
            c_omega=self.c_omega.copy(),
            nu_prime=nu_p,
            label=f"{self.label}-substrate",
        )


@dataclass(frozen=True)
class InterfaceCoefficients:
    """Reflection/transmission coefficients at the two-material interface.

    eta_t, zeta_t belong to the transducer side, eta_s, zeta_s to the
    substrate side; c is the detailed-balance constant.  Valid instances
    satisfy, to round-off,

        eta_t + (nu_s/nu_t) * zeta_s = 1
        (nu_t/nu_s) * zeta_t + eta_s = 1
        eta_t + c * zeta_t = 1
    """

    eta_t: float
    zeta_t: float
    eta_s: float
    zeta_s: float
    nu_t: float
    nu_s: float
    c: float = 1.0

    def net_flux_defects(self) -> tuple[float, float]:
        """The two zero-net-flux identities, as residuals (0 when exact)."""
        d1 = self.nu_t - self.nu_t * self.eta_t - self.nu_s * self.zeta_s
        d2 = self.nu_s - self.nu_s * self.eta_s - self.nu_t * self.zeta_t
        return d1, d2


def reduce_interface_coefficients(
    eta_t: float, nu_t: float, nu_s: float, c: float = 1.0
) -> InterfaceCoefficients:
    """Express all four interface coefficients through the single unknown eta_t.

        zeta_t = (1/c) (1 - eta_t)
        zeta_s = (nu_t/nu_s) (1 - eta_t)
        eta_s  = 1 - (nu_t/nu_s) (1/c) (1 - eta_t)

    Parameters
    ----------
    eta_t : float in [0, 1]
    nu_t, nu_s : float > 0
        Group velocities of transducer and substrate at one frequency.
    c : float > 0
        Detailed-balance constant (default 1).

    Raises
    ------
    InterfaceCoefficientError
        If any derived coefficient falls outside [0, 1], naming it.
    ValueError
        On invalid eta_t, c, or velocities.
    """
    if not 0.0 <= eta_t <= 1.0:
        raise ValueError(f"eta_t={eta_t!r} must lie in [0, 1]")
    if c <= 0.0:
        raise ValueError(f"detailed-balance constant c={c!r} must be positive")
    if nu_t <= 0.0 or nu_s <= 0.0:
        raise ValueError(f"group velocities must be positive, got nu_t={nu_t!r}, nu_s={nu_s!r}")

    zeta_t = (1.0 - eta_t) / c
    zeta_s = (nu_t / nu_s) * (1.0 - eta_t)
    eta_s = 1.0 - (nu_t / nu_s) * (1.0 - eta_t) / c

    for name, value in (("zeta_t", zeta_t), ("zeta_s", zeta_s), ("eta_s", eta_s)):
        if not 0.0 <= value <= 1.0:
            raise InterfaceCoefficientError(name, value)

    return InterfaceCoefficients(
        eta_t=eta_t, zeta_t=zeta_t, eta_s=eta_s, zeta_s=zeta_s, nu_t=nu_t, nu_s=nu_s, c=c
    )


def compute_c_tau(material: MaterialModel, grid) -> float:
    """Closure constant C_tau = <C_omega/tau> on the grid's quadrature.

    Uses exactly the discrete quadrature the collision operator uses
    (sum over mu and omega nodes with their weights), so the relaxation
    operator built from the result conserves <f/tau> identically.

    Raises
    ------
    MaterialValidationError
        If the result is not strictly positive (invalid material table).
    """
    w_mu_total = float(np.sum(grid.mu_weights))
    c_tau = w_mu_total * float(np.sum(grid.omega_weights * material.c_omega / material.tau))
    if not (c_tau > 0.0) or not np.isfinite(c_tau):
        raise MaterialValidationError(f"C_tau={c_tau!r} is not positive; material table invalid")
    return c_tau


def temperature_deviation(f_slice: np.ndarray, material: MaterialModel, grid, c_tau: float) -> float:
    """Temperature deviation <f/tau>/C_tau of one (mu, omega) slice.

    ``c_tau`` must come from ``compute_c_tau`` with the same grid; for
    f = alpha*C_omega the result is alpha exactly (up to round-off).
    """
    s = float(
        np.einsum(
            "m,w,mw->", grid.mu_weights, grid.omega_weights / material.tau, f_slice, optimize=True
        )
    )
    return s / c_tau


def load_material_table(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a two-column (omega, value) CSV; returns sorted node/value arrays."""
    om, val = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                a, b = float(row[0]), float(row[1])
            except ValueError:
                continue  # header line
            om.append(a)
            val.append(b)
    if not om:
        raise MaterialValidationError(f"material table {path} holds no numeric rows")
    order = np.argsort(om)
    return np.asarray(om, dtype=np.float64)[order], np.asarray(val, dtype=np.float64)[order]


def _piecewise_constant(table_omega: np.ndarray, table_value: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """Sample a table onto grid nodes, piecewise-constant from the left."""
    idx = np.searchsorted(table_omega, nodes, side="right") - 1
    idx = np.clip(idx, 0, len(table_omega) - 1)
    return table_value[idx]


def material_from_config(cfg: dict, omega_nodes: np.ndarray, label: str = "material") -> MaterialModel:
    """Build a MaterialModel from a resolved config block.

    Two kinds are supported:

    * ``power_law``: nu = nu_coeff*omega**nu_exp, tau = tau_coeff*omega**tau_exp,
      c_omega = c_omega_coeff*omega**c_omega_exp (exponents default to the
      simplified setup nu=omega, tau=1/omega, c_omega=1).
    * ``table``: per-omega CSV tables sampled piecewise-constantly onto the
      grid nodes.
    """
    kind = cfg.get("kind", "power_law")
    omega_nodes = np.asarray(omega_nodes, dtype=np.float64)
    if kind == "power_law":
        nu_c, nu_e = float(cfg.get("nu_coeff", 1.0)), float(cfg.get("nu_exp", 1.0))
        tau_c, tau_e = float(cfg.get("tau_coeff", 1.0)), float(cfg.get("tau_exp", -1.0))
        cw_c, cw_e = float(cfg.get("c_omega_coeff", 1.0)), float(cfg.get("c_omega_exp", 0.0))
        nu = nu_c * omega_nodes**nu_e
        tau = tau_c * omega_nodes**tau_e
        c_omega = cw_c * omega_nodes**cw_e
        nu_prime = nu_c * nu_e * omega_nodes ** (nu_e - 1.0)
        return MaterialModel(nu=nu, tau=tau, c_omega=c_omega, nu_prime=nu_prime, label=label)
    if kind == "table":
        t_om, t_nu = load_material_table(cfg["nu_csv"])
        nu = _piecewise_constant(t_om, t_nu, omega_nodes)
        t_om, t_tau = load_material_table(cfg["tau_csv"])
        tau = _piecewise_constant(t_om, t_tau, omega_nodes)
        if "c_omega_csv" in cfg and cfg["c_omega_csv"]:
            t_om, t_cw = load_material_table(cfg["c_omega_csv"])
            c_omega = _piecewise_constant(t_om, t_cw, omega_nodes)
        else:
            c_omega = np.ones_like(omega_nodes)
        return MaterialModel(nu=nu, tau=tau, c_omega=c_omega, label=label)
    raise MaterialValidationError(f"material.kind must be 'power_law' or 'table', got {kind!r}")
