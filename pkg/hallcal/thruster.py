"""
One-dimensional axial quasineutral discharge model.

Heavy species (neutrals, singly charged ions) are advanced explicitly with a
finite-volume scheme: first-order upwind for the neutrals, local Lax-Friedrichs
fluxes for the ion continuity and momentum equations. Electrons are
inertialess; the total current density is fixed every step by the integral of
Ohm's law between the anode (phi = V_d) and the cathode (phi = V_cc), which
makes it a single scalar over the whole domain. The electron energy equation is
advanced implicitly in advection, conduction and the linearized loss terms with
one tridiagonal solve per step; Ohmic heating is explicit.

All temperatures are in eV, potentials in V, everything else SI.
"""

from dataclasses import dataclass, field, replace
import logging
import time as ttime
from typing import Any, Mapping, NamedTuple, Optional, Self

import numpy as np
from scipy import constants as phy_const
from scipy.linalg import solve_banded

from .errors import (
    ConfigurationError,
    DegenerateWidthError,
    DomainError,
    SolverDivergenceError,
    SolverTimeoutError,
)
from .params import OperatingCondition, ParameterSet
from .propellant import PropellantSpec
from .utils import TORR


logger = logging.getLogger(__name__)

E = phy_const.e
M_E = phy_const.m_e
K_B = phy_const.k

PRESSURE_SHIFT_CENTER = 25e-6 * TORR  # P_0
_LOGISTIC_OFFSET = 1.0 / (1.0 + np.exp(2.0))

NU_MIN = 1.0  # 1/s, keeps the mobility finite in collisionless cells


@dataclass(frozen=True)
class ThrusterGeometry:
    channel_length: float  # m
    inner_radius: float  # m
    outer_radius: float  # m
    domain_length: Optional[float] = None  # m, defaults to three channel lengths
    wall_shielded: bool = False

    def __post_init__(self) -> None:
        if self.channel_length <= 0.0:
            raise ConfigurationError("Channel length must be positive")
        if not 0.0 < self.inner_radius < self.outer_radius:
            raise ConfigurationError(
                f"Radii must satisfy 0 < inner < outer, got "
                f"{self.inner_radius} and {self.outer_radius}"
            )
        if self.domain_length is None:
            object.__setattr__(self, "domain_length", 3.0 * self.channel_length)
        elif self.domain_length < self.channel_length:
            raise ConfigurationError("Domain must be at least one channel long")

    @property
    def channel_area(self) -> float:
        return np.pi * (self.outer_radius**2 - self.inner_radius**2)

    @property
    def wall_gap(self) -> float:
        return self.outer_radius - self.inner_radius

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        try:
            return cls(
                channel_length=float(config["channel_length"]),
                inner_radius=float(config["inner_radius"]),
                outer_radius=float(config["outer_radius"]),
                domain_length=config.get("domain_length"),
                wall_shielded=bool(config.get("wall_shielded", False)),
            )
        except KeyError as e:
            raise ConfigurationError(f"Missing {e.args[0]} in [thruster]") from e


@dataclass(frozen=True)
class MagneticProfile:
    """Two-sided Gaussian radial field B(z) peaking at z_peak."""

    B_max: float  # T
    z_peak: float  # m
    width_upstream: float  # m
    width_downstream: float  # m

    def __post_init__(self) -> None:
        if self.B_max <= 0.0:
            raise ConfigurationError("B_max must be positive")
        if self.width_upstream <= 0.0 or self.width_downstream <= 0.0:
            raise ConfigurationError("Magnetic field widths must be positive")

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        width = np.where(z < self.z_peak, self.width_upstream, self.width_downstream)
        return self.B_max * np.exp(-(((z - self.z_peak) / width) ** 2))

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        try:
            return cls(**{k: float(config[k]) for k in cls.__dataclass_fields__})
        except KeyError as e:
            raise ConfigurationError(
                f"Missing {e.args[0]} in [thruster.magnetic_field]"
            ) from e


@dataclass(frozen=True)
class AnomParams:
    alpha_anom: float
    beta_anom: float
    z_anom: float  # channel lengths
    L_anom: float  # channel lengths
    dz_anom: float  # channel lengths
    P_0: float = PRESSURE_SHIFT_CENTER  # Pa

    def __post_init__(self) -> None:
        if not 0.0 <= self.beta_anom <= 1.0:
            raise DomainError(f"beta_anom must lie in [0, 1], got {self.beta_anom}")

    @classmethod
    def from_parameters(cls, theta: ParameterSet) -> Self:
        return cls(
            alpha_anom=theta.alpha_anom,
            beta_anom=theta.beta_anom,
            z_anom=theta.z_anom,
            L_anom=theta.L_anom,
            dz_anom=theta.dz_anom,
        )


@dataclass(frozen=True)
class ThrusterParams:
    anom: AnomParams
    u_n: float  # m/s
    c_w: float
    f_n: float

    @classmethod
    def from_parameters(cls, theta: ParameterSet) -> Self:
        return cls(
            anom=AnomParams.from_parameters(theta),
            u_n=theta.u_n,
            c_w=theta.c_w,
            f_n=theta.f_n,
        )


def pressure_shift(p: AnomParams, P_B: float, channel_length: float) -> float:
    """Upstream displacement (m) of the transport barrier at background pressure P_B."""
    logistic = 1.0 / (1.0 + np.exp(-2.0 * (P_B / p.P_0 - 1.0)))
    return p.dz_anom * channel_length * (logistic - _LOGISTIC_OFFSET)


def anomalous_inverse_hall(
    p: AnomParams, z_hat: float | np.ndarray, P_B: float
) -> float | np.ndarray:
    """
    Anomalous inverse Hall parameter nu_anom / omega_ce at normalized axial
    position z_hat: Bohm-like level alpha with a Gaussian transport barrier of
    depth beta, centered at z_anom and shifted upstream with pressure.
    """
    if p.L_anom <= 0.0:
        raise DegenerateWidthError(
            f"Transport barrier width must be positive, got L_anom={p.L_anom}"
        )
    center = p.z_anom - pressure_shift(p, P_B, 1.0)
    barrier = np.exp(-(((np.asarray(z_hat, dtype=float) - center) / p.L_anom) ** 2))
    value = p.alpha_anom * (1.0 - p.beta_anom * barrier)
    return float(value) if np.ndim(value) == 0 else value


def ingestion_flow(
    P_B: float, T_bg: float, geom: ThrusterGeometry, f_n: float, mass: float
) -> float:
    """
    Mass flow (kg/s) of background neutrals entering the channel: f_n times the
    one-sided flux of a stationary Maxwellian across the exit plane.
    """
    if P_B < 0.0:
        raise DomainError("Background pressure must be nonnegative")
    if T_bg <= 0.0:
        raise DomainError("Background temperature must be positive")
    n_bg = P_B / (K_B * T_bg)
    mean_speed = np.sqrt(8.0 * K_B * T_bg / (np.pi * mass))
    return f_n * geom.channel_area * 0.25 * n_bg * mean_speed * mass


@dataclass(frozen=True)
class SolverSettings:
    cells: int = 100
    duration: float = 1e-3  # s
    averaging_window: float = 5e-4  # s
    cfl: float = 0.8
    wall_clock_limit: float = 120.0  # s
    background_temperature: float = 300.0  # K
    ion_temperature: float = 0.1  # eV
    electron_temperature_floor: float = 0.1  # eV
    density_floor: float = 1e12  # m^-3

    def __post_init__(self) -> None:
        if self.cells < 3:
            raise ConfigurationError("The grid needs at least three cells")
        if not 0.0 < self.averaging_window <= self.duration:
            raise ConfigurationError(
                "Averaging window must be positive and no longer than the run"
            )
        if not 0.0 < self.cfl <= 1.0:
            raise ConfigurationError("CFL number must lie in (0, 1]")

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        unknown = set(config) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(
                f"Unknown keys in [thruster.numerics]: {sorted(unknown)}"
            )
        return cls(**config)

    def cheapened(self, cells: int = 50, duration: float = 3e-4) -> Self:
        return replace(
            self,
            cells=cells,
            duration=duration,
            averaging_window=min(self.averaging_window, duration / 2),
        )


@dataclass
class PlasmaState:
    z: np.ndarray  # m
    n_n: np.ndarray  # m^-3
    n_i: np.ndarray  # m^-3
    u_i: np.ndarray  # m/s
    u_e: np.ndarray  # m/s
    T_e: np.ndarray  # eV
    phi: np.ndarray  # V
    E_z: np.ndarray  # V/m
    j_total: float  # A/m^2

    def current_density_profile(self) -> np.ndarray:
        return E * self.n_i * (self.u_i - self.u_e)

    def columns(self) -> dict[str, np.ndarray]:
        return {
            "z": self.z,
            "n_n": self.n_n,
            "n_i": self.n_i,
            "u_i": self.u_i,
            "T_e": self.T_e,
            "phi": self.phi,
            "E_z": self.E_z,
        }


@dataclass
class ThrusterOutput:
    thrust_uncorrected: float  # N
    discharge_current: float  # A
    ion_beam_current: float  # A
    z: np.ndarray
    ion_velocity: np.ndarray
    state: PlasmaState  # time-averaged
    final_state: PlasmaState
    window: tuple[float, float]
    steps: int
    mass_inflow: float  # kg/s
    mass_outflow: float  # kg/s, time-averaged over the window
    extra_columns: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def ion_velocity_profile(self) -> tuple[np.ndarray, np.ndarray]:
        return self.z, self.ion_velocity

    def profile_columns(self) -> dict[str, np.ndarray]:
        return {**self.state.columns(), **self.extra_columns}


def thrust_uncorrected(
    state: PlasmaState, geom: ThrusterGeometry, propellant: PropellantSpec
) -> float:
    """Ion-beam momentum flux through the exit plane."""
    return float(
        geom.channel_area * propellant.ion_mass * state.n_i[-1] * state.u_i[-1] ** 2
    )


def discharge_current(state: PlasmaState, geom: ThrusterGeometry) -> float:
    return float(geom.channel_area * state.j_total)


def ion_beam_current(state: PlasmaState, geom: ThrusterGeometry) -> float:
    return float(E * state.n_i[-1] * state.u_i[-1] * geom.channel_area)


class _Closure(NamedTuple):
    u_i: np.ndarray
    u_e: np.ndarray
    E_z: np.ndarray
    phi: np.ndarray
    j: float
    mobility: np.ndarray
    k_iz: np.ndarray


class DischargeSolver:
    """
    Owns the mutable plasma state of one discharge simulation. Not thread-safe;
    run independent instances for concurrent simulations.
    """

    def __init__(
        self,
        geometry: ThrusterGeometry,
        field: MagneticProfile,
        propellant: PropellantSpec,
        params: ThrusterParams,
        condition: OperatingCondition,
        cathode_voltage: float,
        cathode_temperature: float,
        settings: Optional[SolverSettings] = None,
    ) -> None:
        if cathode_temperature <= 0.0:
            raise DomainError("Cathode electron temperature must be positive")
        if cathode_voltage >= condition.discharge_voltage:
            raise DomainError(
                f"Cathode coupling voltage {cathode_voltage:.3g} V must be below "
                f"the discharge voltage {condition.discharge_voltage:.3g} V"
            )
        if params.u_n <= 0.0:
            raise DomainError("Neutral speed must be positive")
        self.geometry = geometry
        self.field = field
        self.propellant = propellant
        self.params = params
        self.condition = condition
        self.cathode_voltage = cathode_voltage
        self.cathode_temperature = float(cathode_temperature)
        self.settings = settings or SolverSettings()

        s = self.settings
        self.dz = geometry.domain_length / s.cells
        self.z = (np.arange(s.cells) + 0.5) * self.dz
        self.B = field(self.z)
        self.omega_ce = E * self.B / M_E
        self.inverse_hall = anomalous_inverse_hall(
            params.anom, self.z / geometry.channel_length, condition.background_pressure
        )
        self.nu_anom = self.omega_ce * self.inverse_hall
        self.in_channel = self.z < geometry.channel_length

        self.mass_inflow = condition.anode_mass_flow + ingestion_flow(
            condition.background_pressure,
            s.background_temperature,
            geometry,
            params.f_n,
            propellant.ion_mass,
        )
        self.neutral_inflow = self.mass_inflow / (
            propellant.ion_mass * geometry.channel_area
        )
        self.edge_ratio = 0.5 * params.c_w

        self.time = 0.0
        self.step = 0
        self._initialize()

    def _initialize(self) -> None:
        s = self.settings
        m = self.propellant.ion_mass
        z_hat = self.z / self.geometry.channel_length
        drop = self.condition.discharge_voltage - self.cathode_voltage
        T_ec = self.cathode_temperature

        self.n_n = np.full(s.cells, self.neutral_inflow / self.params.u_n)
        self.n_i = np.maximum(0.05 * self.n_n, s.density_floor)
        u_exit = np.sqrt(2.0 * E * drop / m)
        self.flux_i = self.n_i * u_exit * np.clip(z_hat - 0.5, 0.0, 1.0)
        self.T_e = np.maximum(
            T_ec + 0.08 * drop * np.exp(-(((z_hat - 1.0) / 0.5) ** 2)),
            s.electron_temperature_floor,
        )

    def _closure(self) -> _Closure:
        n_i, T_e = self.n_i, self.T_e
        u_i = self.flux_i / n_i
        k_iz = self.propellant.ionization_rate(T_e)
        nu_e = np.maximum(
            self.n_n * self.propellant.collision_rate(T_e) + self.nu_anom, NU_MIN
        )
        hall = self.omega_ce / nu_e
        mobility = E / (M_E * nu_e) / (1.0 + hall**2)

        grad_pe = np.gradient(n_i * T_e, self.dz)
        drop = self.condition.discharge_voltage - self.cathode_voltage
        numerator = drop + self.dz * np.sum(u_i / mobility + grad_pe / n_i)
        denominator = self.dz * np.sum(1.0 / (n_i * mobility))
        j = E * numerator / denominator

        u_e = u_i - j / (E * n_i)
        E_z = -u_e / mobility - grad_pe / n_i
        phi = self.condition.discharge_voltage - self.dz * (np.cumsum(E_z) - 0.5 * E_z)
        return _Closure(u_i, u_e, E_z, phi, float(j), mobility, k_iz)

    def _ion_fluxes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        m = self.propellant.ion_mass
        T_i = self.settings.ion_temperature
        n_i, G, T_e = self.n_i, self.flux_i, self.T_e

        # Bohm sheath at the anode, zero gradient at the cathode boundary.
        u_bohm_anode = np.sqrt(E * T_e[0] / m)
        n_ext = np.concatenate(([n_i[0]], n_i, [n_i[-1]]))
        G_ext = np.concatenate(([-n_i[0] * u_bohm_anode], G, [max(G[-1], 0.0)]))
        T_ext = np.concatenate(([T_e[0]], T_e, [T_e[-1]]))
        u_ext = G_ext / n_ext
        sound = np.sqrt(E * (T_i + T_ext) / m)
        momentum = G_ext * u_ext + n_ext * E * T_i / m

        wave = np.maximum(
            np.abs(u_ext[:-1]) + sound[:-1], np.abs(u_ext[1:]) + sound[1:]
        )
        mass_flux = 0.5 * (G_ext[:-1] + G_ext[1:]) - 0.5 * wave * np.diff(n_ext)
        momentum_flux = 0.5 * (momentum[:-1] + momentum[1:]) - 0.5 * wave * np.diff(
            G_ext
        )
        return mass_flux, momentum_flux, wave

    def _wall_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Ion wall-loss frequency and electron wall energy loss (eV m^-3 s^-1)."""
        m = self.propellant.ion_mass
        gap = self.geometry.wall_gap
        if self.geometry.wall_shielded:
            nu_iw = np.zeros_like(self.z)
            T_wall = self.T_e[0]
        else:
            u_bohm = np.sqrt(E * self.T_e / m)
            nu_iw = np.where(self.in_channel, 2.0 * self.edge_ratio * u_bohm / gap, 0.0)
            T_wall = float(np.mean(self.T_e[self.in_channel]))
        nu_wall = 2.0 * self.edge_ratio * np.sqrt(E * T_wall / m) / gap
        sheath = T_wall * np.log(np.sqrt(m / (2.0 * np.pi * M_E)))
        energy_loss = np.where(
            self.in_channel, nu_wall * self.n_i * (2.0 * T_wall + sheath), 0.0
        )
        return nu_iw, energy_loss

    def _time_step(
        self,
        closure: _Closure,
        wave: np.ndarray,
        nu_iw: np.ndarray,
        heating: np.ndarray,
    ) -> float:
        s = self.settings
        dt_cfl = s.cfl * self.dz / max(float(wave.max()), self.params.u_n)

        rate = max(
            float(np.max(self.n_n * closure.k_iz)),
            float(np.max(self.n_i * closure.k_iz)),
            float(np.max(nu_iw)),
        )
        dt_iz = s.cfl / rate if rate > 0.0 else np.inf

        # Explicit heating limit, taken over the cells that carry the plasma.
        # It never drops the step below a tenth of the CFL step: the implicit
        # loss terms keep the energy update stable there.
        dense = self.n_i > 1e-3 * self.n_i.max()
        heating_rate = heating[dense] / (1.5 * self.n_i[dense] * self.T_e[dense])
        dt_energy = s.cfl / heating_rate.max() if heating_rate.max() > 0.0 else np.inf
        dt_energy = max(dt_energy, 0.1 * dt_cfl)

        return min(dt_cfl, dt_iz, dt_energy, s.duration - self.time)

    def _energy_update(
        self,
        dt: float,
        closure: _Closure,
        n_i_old: np.ndarray,
        ionization: np.ndarray,
        wall_loss: np.ndarray,
        heating: np.ndarray,
    ) -> np.ndarray:
        dz = self.dz
        T = self.T_e
        T_cathode = self.cathode_temperature
        n = len(T)

        gamma_e = n_i_old * closure.u_e
        kappa = 2.5 * n_i_old * closure.mobility * T
        advect = 2.5 * 0.5 * (gamma_e[:-1] + gamma_e[1:])
        conduct = 0.5 * (kappa[:-1] + kappa[1:]) / dz
        a_plus = np.maximum(advect, 0.0)
        a_minus = np.minimum(advect, 0.0)

        losses = ionization * self.propellant.ionization_energy_cost + wall_loss
        diag = 1.5 * self.n_i / dt + losses / T
        upper = np.zeros(n)
        lower = np.zeros(n)
        diag[:-1] += (a_plus + conduct) / dz
        diag[1:] += (conduct - a_minus) / dz
        upper[1:] = (a_minus - conduct) / dz
        lower[:-1] = -(a_plus + conduct) / dz
        rhs = 1.5 * n_i_old * T / dt + heating

        # Anode: electrons leave with the local temperature, no conduction.
        diag[0] -= min(2.5 * gamma_e[0], 0.0) / dz
        # Cathode: fixed temperature T_ec half a cell beyond the last center.
        a_out = 2.5 * gamma_e[-1]
        k_out = kappa[-1] / (0.5 * dz)
        diag[-1] += (max(a_out, 0.0) + k_out) / dz
        rhs[-1] -= (min(a_out, 0.0) - k_out) * T_cathode / dz

        banded = np.vstack((upper, diag, lower))
        T_new = solve_banded((1, 1), banded, rhs)
        return np.maximum(T_new, self.settings.electron_temperature_floor)

    def _check_finite(self, **fields: np.ndarray) -> None:
        for name, values in fields.items():
            if not np.all(np.isfinite(values)):
                raise SolverDivergenceError(self.step, name, self.time)

    def advance(self) -> tuple[float, _Closure, np.ndarray, np.ndarray]:
        """Take one step. Returns (dt, closure, ion flux, neutral flux)."""
        s = self.settings
        m = self.propellant.ion_mass
        closure = self._closure()
        self._check_finite(j_total=np.array(closure.j), E_z=closure.E_z)

        mass_flux, momentum_flux, wave = self._ion_fluxes()
        nu_iw, wall_loss = self._wall_terms()
        heating = self.n_i * closure.u_e**2 / closure.mobility
        dt = self._time_step(closure, wave, nu_iw, heating)

        ionization = self.n_n * self.n_i * closure.k_iz
        neutral_flux = np.empty(s.cells + 1)
        neutral_flux[0] = self.neutral_inflow + max(-mass_flux[0], 0.0)
        neutral_flux[1:] = self.params.u_n * self.n_n

        n_i_old = self.n_i
        n_n = (
            self.n_n
            - dt / self.dz * np.diff(neutral_flux)
            + dt * (nu_iw * self.n_i - ionization)
        )
        n_i = self.n_i - dt / self.dz * np.diff(mass_flux) + dt * (
            ionization - nu_iw * self.n_i
        )
        flux_i = self.flux_i - dt / self.dz * np.diff(momentum_flux) + dt * (
            E / m * self.n_i * closure.E_z
            + ionization * self.params.u_n
            - nu_iw * self.flux_i
        )
        self._check_finite(n_n=n_n, n_i=n_i, u_i=flux_i)

        floored = n_i <= s.density_floor
        self.n_n = np.maximum(n_n, s.density_floor)
        self.n_i = np.maximum(n_i, s.density_floor)
        self.flux_i = np.where(floored, 0.0, flux_i)

        T_e = self._energy_update(
            dt, closure, n_i_old, ionization, wall_loss, heating
        )
        self._check_finite(T_e=T_e)
        self.T_e = T_e

        self.time += dt
        self.step += 1
        return dt, closure, mass_flux, neutral_flux

    def run(self) -> ThrusterOutput:
        s = self.settings
        m = self.propellant.ion_mass
        area = self.geometry.channel_area
        window_start = s.duration - s.averaging_window
        started = ttime.perf_counter()

        names = ("n_n", "n_i", "u_i", "u_e", "T_e", "phi", "E_z")
        sums = {name: np.zeros(s.cells) for name in names}
        scalars = dict(current=0.0, thrust=0.0, beam=0.0, outflow=0.0)
        weight = 0.0
        closure = None

        logger.debug(
            "Solving discharge on %d cells for %.3g s at %s (V_cc=%.2f V)",
            s.cells,
            s.duration,
            self.condition,
            self.cathode_voltage,
        )
        while self.time < s.duration * (1.0 - 1e-12):
            n_n, n_i = self.n_n, self.n_i
            T_e = self.T_e
            dt, closure, mass_flux, neutral_flux = self.advance()

            if self.time > window_start:
                w = min(dt, self.time - window_start)
                weight += w
                snapshot = PlasmaState(
                    z=self.z,
                    n_n=n_n,
                    n_i=n_i,
                    u_i=closure.u_i,
                    u_e=closure.u_e,
                    T_e=T_e,
                    phi=closure.phi,
                    E_z=closure.E_z,
                    j_total=closure.j,
                )
                for name in names:
                    sums[name] += w * getattr(snapshot, name)
                scalars["current"] += w * discharge_current(snapshot, self.geometry)
                scalars["thrust"] += w * thrust_uncorrected(
                    snapshot, self.geometry, self.propellant
                )
                scalars["beam"] += w * ion_beam_current(snapshot, self.geometry)
                scalars["outflow"] += w * m * area * (neutral_flux[-1] + mass_flux[-1])

            if self.step % 500 == 0:
                elapsed = ttime.perf_counter() - started
                if elapsed > s.wall_clock_limit:
                    raise SolverTimeoutError(self.step, elapsed, s.wall_clock_limit)

        averaged = PlasmaState(
            z=self.z,
            **{name: sums[name] / weight for name in names},
            j_total=scalars["current"] / (area * weight),
        )
        final = self._closure()
        final_state = PlasmaState(
            z=self.z,
            n_n=self.n_n.copy(),
            n_i=self.n_i.copy(),
            u_i=final.u_i,
            u_e=final.u_e,
            T_e=self.T_e.copy(),
            phi=final.phi,
            E_z=final.E_z,
            j_total=final.j,
        )
        output = ThrusterOutput(
            thrust_uncorrected=scalars["thrust"] / weight,
            discharge_current=scalars["current"] / weight,
            ion_beam_current=scalars["beam"] / weight,
            z=self.z,
            ion_velocity=averaged.u_i,
            state=averaged,
            final_state=final_state,
            window=(window_start, s.duration),
            steps=self.step,
            mass_inflow=self.mass_inflow,
            mass_outflow=scalars["outflow"] / weight,
            extra_columns={"B": self.B, "inverse_hall": self.inverse_hall},
        )
        logger.info(
            "Discharge solved in %d steps (%.2f s): I_D=%.3f A, I_B=%.3f A, T=%.2f mN",
            self.step,
            ttime.perf_counter() - started,
            output.discharge_current,
            output.ion_beam_current,
            1e3 * output.thrust_uncorrected,
        )
        return output


def solve_discharge(
    geom: ThrusterGeometry,
    field: MagneticProfile,
    propellant: PropellantSpec,
    theta_thruster: ThrusterParams,
    cond: OperatingCondition,
    V_cc: float,
    T_ec: float,
    settings: Optional[SolverSettings] = None,
) -> ThrusterOutput:
    """Run one discharge simulation and return its time-averaged outputs."""
    return DischargeSolver(
        geom, field, propellant, theta_thruster, cond, V_cc, T_ec, settings=settings
    ).run()
