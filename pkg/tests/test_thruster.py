import numpy as np
import pytest

from hallcal.errors import ConfigurationError, DegenerateWidthError, DomainError
from hallcal.thruster import (
    E,
    K_B,
    AnomParams,
    DischargeSolver,
    MagneticProfile,
    PlasmaState,
    SolverSettings,
    ThrusterGeometry,
    ThrusterParams,
    anomalous_inverse_hall,
    discharge_current,
    ingestion_flow,
    ion_beam_current,
    pressure_shift,
    solve_discharge,
    thrust_uncorrected,
)
from hallcal.params import OperatingCondition
from hallcal.utils import to_si


@pytest.fixture
def anom(theta) -> AnomParams:
    return AnomParams.from_parameters(theta)


def test_no_shift_in_vacuum(anom):
    assert pressure_shift(anom, 0.0, 0.025) == pytest.approx(0.0, abs=1e-15)


def test_shift_at_center_pressure(anom):
    L = 0.025
    expected = anom.dz_anom * L * (0.5 - 1.0 / (1.0 + np.e**2))
    assert pressure_shift(anom, anom.P_0, L) == pytest.approx(expected, rel=1e-12)


def test_shift_grows_with_pressure(anom):
    pressures = to_si(np.linspace(0.0, 200.0, 50), "uTorr")
    shifts = [pressure_shift(anom, P, 0.025) for P in pressures]
    assert np.all(np.diff(shifts) > 0.0)
    assert shifts[-1] < anom.dz_anom * 0.025


def test_barrier_trough(anom):
    P_B = to_si(10.0, "uTorr")
    center = anom.z_anom - pressure_shift(anom, P_B, 1.0)
    value = anomalous_inverse_hall(anom, center, P_B)
    assert value == pytest.approx(anom.alpha_anom * (1.0 - anom.beta_anom))
    far = anomalous_inverse_hall(anom, center + 20 * anom.L_anom, P_B)
    assert far == pytest.approx(anom.alpha_anom)


def test_barrier_vectorized(anom):
    z_hat = np.linspace(0.0, 3.0, 31)
    values = anomalous_inverse_hall(anom, z_hat, 0.0)
    assert values.shape == z_hat.shape
    assert np.all(values >= anom.alpha_anom * (1.0 - anom.beta_anom) - 1e-15)
    assert np.all(values <= anom.alpha_anom)


def test_degenerate_barrier_width(anom):
    flat = AnomParams(anom.alpha_anom, anom.beta_anom, anom.z_anom, 0.0, anom.dz_anom)
    with pytest.raises(DegenerateWidthError):
        anomalous_inverse_hall(flat, 1.0, 0.0)


def test_beta_out_of_range():
    with pytest.raises(DomainError):
        AnomParams(0.1, 1.5, 1.0, 0.2, 0.2)


def test_ingestion_flow(geometry, xenon):
    P_B = to_si(5.0, "uTorr")
    T = 300.0
    m = xenon.ion_mass
    n = P_B / (K_B * T)
    speed = np.sqrt(8.0 * K_B * T / (np.pi * m))
    expected = 5.0 * geometry.channel_area * 0.25 * n * speed * m
    assert ingestion_flow(P_B, T, geometry, 5.0, m) == pytest.approx(expected)
    assert ingestion_flow(0.0, T, geometry, 5.0, m) == 0.0


def test_geometry_defaults():
    geometry = ThrusterGeometry(0.025, 0.0345, 0.05)
    assert geometry.domain_length == pytest.approx(0.075)
    assert geometry.wall_gap == pytest.approx(0.0155)
    with pytest.raises(ConfigurationError):
        ThrusterGeometry(0.025, 0.05, 0.0345)


def test_settings_validation():
    with pytest.raises(ConfigurationError):
        SolverSettings(averaging_window=2e-3)
    with pytest.raises(ConfigurationError, match="Unknown keys"):
        SolverSettings.from_config({"grid": 10})
    cheap = SolverSettings().cheapened()
    assert cheap.cells < SolverSettings().cells
    assert cheap.averaging_window <= cheap.duration


def test_solver_rejects_cathode_above_anode(geometry, field, xenon, theta, condition):
    with pytest.raises(DomainError):
        DischargeSolver(
            geometry,
            field,
            xenon,
            ThrusterParams.from_parameters(theta),
            condition,
            cathode_voltage=condition.discharge_voltage + 1.0,
            cathode_temperature=2.0,
        )


def _solve(geometry, field, xenon, theta, condition, settings):
    return solve_discharge(
        geometry,
        field,
        xenon,
        ThrusterParams.from_parameters(theta),
        condition,
        30.0,
        theta.T_ec,
        settings,
    )


@pytest.mark.slow
def test_discharge_physical_bounds(geometry, field, xenon, theta, condition):
    out = _solve(geometry, field, xenon, theta, condition, SolverSettings())
    assert 0.0 < out.ion_beam_current < out.discharge_current
    assert out.thrust_uncorrected > 0.0
    u_max = np.sqrt(2.0 * E * condition.discharge_voltage / xenon.ion_mass)
    assert out.ion_velocity[-1] <= u_max * (1.0 + 1e-12)
    assert np.max(out.ion_velocity) <= u_max * (1.0 + 1e-12)
    assert out.mass_outflow == pytest.approx(out.mass_inflow, rel=0.02)
    assert out.window == (5e-4, 1e-3)


@pytest.mark.slow
def test_current_density_uniform(geometry, field, xenon, theta, condition):
    out = _solve(geometry, field, xenon, theta, condition, SolverSettings().cheapened())
    profile = out.final_state.current_density_profile()
    assert profile == pytest.approx(out.final_state.j_total, rel=1e-9)


def test_barrier_trough_moves_upstream_with_pressure(geometry, field, xenon, theta):
    settings = SolverSettings().cheapened()
    peaks = []
    for pressure in (5.0, 25.0, 50.0):
        cond = OperatingCondition.from_units(300.0, pressure, 5.0, pressure_unit="uTorr")
        solver = DischargeSolver(
            geometry,
            field,
            xenon,
            ThrusterParams.from_parameters(theta),
            cond,
            30.0,
            theta.T_ec,
            settings,
        )
        peaks.append(solver.z[np.argmin(solver.inverse_hall)])
    assert peaks[0] >= peaks[1] >= peaks[2]
    assert peaks[0] > peaks[2]


def _exit_state(n_i: float, u_i: float, j_total: float = 0.0) -> PlasmaState:
    z = np.linspace(0.0, 0.075, 4)
    ones = np.ones_like(z)
    return PlasmaState(
        z=z,
        n_n=1e19 * ones,
        n_i=np.array([1e16, 1e16, 1e16, n_i]),
        u_i=np.array([0.0, 1e3, 5e3, u_i]),
        u_e=np.zeros_like(z),
        T_e=10.0 * ones,
        phi=np.zeros_like(z),
        E_z=np.zeros_like(z),
        j_total=j_total,
    )


@pytest.fixture
def forty_cm2() -> ThrusterGeometry:
    inner = 0.02
    outer = np.sqrt(inner**2 + 40e-4 / np.pi)
    return ThrusterGeometry(0.025, inner, outer)


def test_thrust_from_exit_momentum_flux(forty_cm2, xenon):
    state = _exit_state(1e17, 15e3)
    expected = 40e-4 * xenon.ion_mass * 1e17 * 15e3**2
    assert thrust_uncorrected(state, forty_cm2, xenon) == pytest.approx(expected)
    doubled = _exit_state(1e17, 30e3)
    assert thrust_uncorrected(doubled, forty_cm2, xenon) == pytest.approx(4 * expected)
    assert thrust_uncorrected(_exit_state(1e17, 0.0), forty_cm2, xenon) == 0.0


def test_discharge_current_from_total_current_density(forty_cm2):
    state = _exit_state(1e17, 15e3, j_total=1000.0)
    assert discharge_current(state, forty_cm2) == pytest.approx(4.0)
    assert discharge_current(_exit_state(1e12, 0.0), forty_cm2) == 0.0


def test_ion_beam_current_through_exit_plane(forty_cm2):
    state = _exit_state(1e17, 15e3)
    assert ion_beam_current(state, forty_cm2) == pytest.approx(E * 1e17 * 15e3 * 40e-4)


def _half_rise(z: np.ndarray, u: np.ndarray) -> float:
    half = 0.5 * u[-1]
    k = int(np.argmax(u >= half))
    return float(np.interp(half, u[k - 1 : k + 1], z[k - 1 : k + 1]))


@pytest.mark.slow
def test_acceleration_region_moves_upstream_with_pressure(
    geometry, field, xenon, theta
):
    locations = []
    for pressure in (5.0, 25.0, 50.0):
        cond = OperatingCondition.from_units(300.0, pressure, 5.0, pressure_unit="uTorr")
        out = _solve(geometry, field, xenon, theta, cond, SolverSettings())
        locations.append(_half_rise(out.z, out.ion_velocity))
    assert locations[0] >= locations[1] >= locations[2]
    assert locations[0] > locations[2]


@pytest.mark.slow
def test_grid_refinement(geometry, field, xenon, theta, condition):
    coarse = _solve(geometry, field, xenon, theta, condition, SolverSettings(cells=100))
    fine = _solve(geometry, field, xenon, theta, condition, SolverSettings(cells=200))
    assert fine.discharge_current == pytest.approx(coarse.discharge_current, rel=0.05)
    assert fine.thrust_uncorrected == pytest.approx(coarse.thrust_uncorrected, rel=0.05)


@pytest.mark.slow
def test_advection_only_limit(geometry, theta, condition, xenon):
    flat = MagneticProfile(
        B_max=0.015, z_peak=0.025, width_upstream=1e3, width_downstream=1e3
    )
    grid = xenon.ionization_temperatures
    inert = xenon.with_ionization_table(grid, np.zeros_like(grid))
    solver = DischargeSolver(
        geometry,
        flat,
        inert,
        ThrusterParams.from_parameters(theta),
        condition,
        30.0,
        theta.T_ec,
    )
    out = solver.run()
    expected = solver.mass_inflow / (xenon.ion_mass * geometry.channel_area * theta.u_n)
    assert out.state.n_n == pytest.approx(expected, rel=1e-3)
    mass_current = E * condition.anode_mass_flow / xenon.ion_mass
    assert out.discharge_current < 1e-3 * mass_current
    assert out.thrust_uncorrected < 1e-6
