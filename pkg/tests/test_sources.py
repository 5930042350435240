import numpy as np
import pytest

from phonon_inverse.sources import (
    ReflectionModel,
    SourceSpec,
    TestFunctionSpec,
    bump,
    bump_cell_mean,
    eta_tanh,
    psi_bump,
    round_trip_time,
)


class TestBump:
    def test_unit_mass(self):
        y = np.linspace(0, 1, 20001)
        assert np.trapezoid(bump(y), y) == pytest.approx(1.0, abs=1e-7)

    def test_support(self):
        assert bump(np.asarray([-0.1, 0.0, 1.0, 1.1])).tolist() == [0, 0, 0, 0]
        assert bump(np.asarray([0.5]))[0] > 2.0  # peaked well above 1

    def test_psi_bump_unit_mass_on_pm1(self):
        y = np.linspace(-1, 1, 20001)
        assert np.trapezoid(psi_bump(y), y) == pytest.approx(1.0, abs=1e-7)

    def test_cell_mean_preserves_mass(self):
        edges = np.linspace(-0.5, 1.5, 41)
        means = bump_cell_mean(edges[:-1], edges[1:])
        mass = float(np.sum(means * np.diff(edges)))
        assert mass == pytest.approx(1.0, abs=1e-9)


class TestEtaTanh:
    def test_at_both_knees(self):
        assert eta_tanh(1.0, 1.0, 1.0) == pytest.approx(0.5)

    def test_large_omega_asymptote(self):
        assert eta_tanh(1e6, 1.5, 1.0) == pytest.approx(0.5, abs=1e-12)

    def test_scalar_evaluation(self):
        # 0.25*tanh(-5) + 0.5, second term vanishes at omega = b
        assert float(eta_tanh(1.0, 1.5, 1.0)) == pytest.approx(0.250023, abs=5e-7)

    def test_reflection_model_clamps(self):
        table = ReflectionModel(kind="table", table_omega=[0.0, 1.0, 2.0],
                                table_eta=[-0.5, 0.5, 1.7])
        vals = table.values(np.asarray([0.0, 1.0, 2.0]))
        assert vals.min() >= 0.0 and vals.max() <= 1.0


class TestSourceSpec:
    def test_smooth_support_must_fit_mu_range(self):
        with pytest.raises(ValueError, match="inside"):
            SourceSpec(kind="smooth", mu0=0.95, omega0=1.0, theta_mu=0.2)

    def test_smooth_needs_omega0(self):
        with pytest.raises(ValueError, match="omega0"):
            SourceSpec(kind="smooth", mu0=0.5, omega0=None)

    def test_grid_delta_resolve(self, desk_grid):
        src = SourceSpec(kind="grid_delta", mu0=0.935, omega_index=4)
        nodes = src.resolve_nodes(desk_grid)
        assert nodes["mu_snapped"] == pytest.approx(0.925)
        # Kronecker-delta convention: boundary value 1/(dmu*domega) at the node
        pmu, pom = nodes["pmu"], nodes["pom"]
        peak = pmu[nodes["mu_index"]] * pom[nodes["omega_index"]]
        dmu = desk_grid.mu_weights[nodes["mu_index"]]
        dom = desk_grid.omega_weights[nodes["omega_index"]]
        assert peak == pytest.approx(1.0 / (dmu * dom), rel=1e-12)
        assert src.time_factor(0.0, desk_grid.dt) == 1.0
        assert src.time_factor(desk_grid.dt, desk_grid.dt) == 0.0

    def test_smooth_cell_mean_mass_on_grid(self, desk_grid):
        src = SourceSpec(kind="smooth", mu0=0.475, omega0=1.0, theta_t=0.1,
                         theta_mu=0.11, theta_omega=0.37, sampling="cell_mean")
        nodes = src.resolve_nodes(desk_grid)
        mu_mass = float(np.sum(nodes["pmu"] * desk_grid.mu_weights))
        om_mass = float(np.sum(nodes["pom"] * desk_grid.omega_weights))
        assert mu_mass == pytest.approx(1.0, abs=1e-6)
        assert om_mass == pytest.approx(1.0, abs=1e-6)

    def test_point_sampling_on_fine_grid(self, paper_grid):
        src = SourceSpec(kind="smooth", mu0=0.5, omega0=1.0, theta_t=0.1,
                         theta_mu=0.3, theta_omega=0.5, sampling="point")
        nodes = src.resolve_nodes(paper_grid)
        mu_mass = float(np.sum(nodes["pmu"] * paper_grid.mu_weights))
        assert mu_mass == pytest.approx(1.0, rel=1e-6)

    def test_phi_matches_resolved_tables(self, desk_grid):
        src = SourceSpec(kind="smooth", mu0=0.5, omega0=1.0, theta_t=0.2,
                         theta_mu=0.2, theta_omega=0.4, sampling="point")
        nodes = src.resolve_nodes(desk_grid)
        m = int(np.argmax(nodes["pmu"]))
        w = int(np.argmax(nodes["pom"]))
        t = 0.07
        expected = src.time_factor(t, desk_grid.dt) * nodes["pmu"][m] * nodes["pom"][w]
        got = float(src.phi(t, float(desk_grid.mu_nodes[m]), float(desk_grid.omega_nodes[w]),
                            desk_grid))
        assert got == pytest.approx(expected, rel=1e-12)


class TestTestFunction:
    def test_window_and_recenter(self):
        tf = TestFunctionSpec(kind="smooth", theta=0.2).with_t1(1.5)
        lo, hi = tf.window()
        assert (lo, hi) == (1.3, 1.7)
        y = np.linspace(1.3, 1.7, 8001)
        assert np.trapezoid(tf.psi(y), y) == pytest.approx(0.2, abs=1e-6)

    def test_round_trip_time(self):
        assert round_trip_time(0.5, 4.0, 0.935, 1.45) == pytest.approx(2.9504, abs=1e-3)
        assert round_trip_time(1.0, 1.0, 1.0, 1.0) == pytest.approx(2.0)
