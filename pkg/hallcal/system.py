from collections import OrderedDict
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from graphlib import TopologicalSorter
from itertools import repeat
import logging
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Self, Sequence

import numpy as np

from .cathode import CathodeParams, coupling_voltage
from .errors import ConfigurationError, DomainError, HallcalError, SolverError
from .params import OperatingCondition, ParameterSet
from .plume import (
    ANGLE_TOLERANCE,
    CEX_CROSS_SECTION,
    PlumeParams,
    corrected_thrust,
    current_density,
    plume_divergence,
)
from .propellant import PropellantSpec, load_propellant
from .thruster import (
    MagneticProfile,
    SolverSettings,
    ThrusterGeometry,
    ThrusterOutput,
    ThrusterParams,
    solve_discharge,
)
from .utils import fingerprint


logger = logging.getLogger(__name__)

QOI_KINDS: tuple[str, ...] = ("V_cc", "T_c", "I_D", "u_ion", "j_ion")
SCALAR_QOIS: tuple[str, ...] = ("V_cc", "T_c", "I_D")
# model-only profiles, predicted but never observed
PROFILE_QOIS: tuple[str, ...] = ("nu_anom",)
OUTPUT_QOIS: tuple[str, ...] = QOI_KINDS + PROFILE_QOIS
# Bohm collision frequency in units of the cyclotron frequency
BOHM_COEFFICIENT = 1.0 / 16.0
QOI_QUANTITIES: dict[str, str] = {
    "V_cc": "voltage",
    "T_c": "force",
    "I_D": "current",
    "u_ion": "velocity",
    "j_ion": "current_density",
}
QOI_COMPONENTS: dict[str, str] = {
    "V_cc": "cathode",
    "I_D": "thruster",
    "u_ion": "thruster",
    "T_c": "plume",
    "j_ion": "plume",
    "nu_anom": "thruster",
}
# component -> components it consumes outputs of
COMPONENT_INPUTS: dict[str, tuple[str, ...]] = {
    "cathode": (),
    "thruster": ("cathode",),
    "plume": ("thruster",),
}


def component_order(qois: Iterable[str]) -> list[str]:
    """Components needed for the given QoIs, upstream first."""
    needed: set[str] = set()
    stack = [QOI_COMPONENTS[q] for q in qois]
    while stack:
        component = stack.pop()
        if component not in needed:
            needed.add(component)
            stack.extend(COMPONENT_INPUTS[component])
    sorter = TopologicalSorter[str]()
    for component in needed:
        sorter.add(component, *COMPONENT_INPUTS[component])
    return list(sorter.static_order())


@dataclass(frozen=True)
class OutputRequest:
    """Which QoIs to compute, and the (radius, angles) sweeps for j_ion."""

    qois: frozenset[str] = frozenset(QOI_KINDS)
    sweeps: tuple[tuple[float, tuple[float, ...]], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "qois", frozenset(self.qois))
        unknown = self.qois - set(OUTPUT_QOIS)
        if unknown:
            raise ConfigurationError(f"Unknown QoIs {sorted(unknown)}")
        object.__setattr__(
            self,
            "sweeps",
            tuple(
                (float(r), tuple(float(p) for p in phi)) for r, phi in self.sweeps
            ),
        )

    @classmethod
    def only(cls, *qois: str) -> Self:
        return cls(frozenset(qois))

    def with_sweep(self, radius: float, phi: Sequence[float]) -> Self:
        return type(self)(self.qois | {"j_ion"}, (*self.sweeps, (radius, tuple(phi))))

    @property
    def components(self) -> list[str]:
        return component_order(sorted(self.qois))

    @property
    def cache_key(self) -> tuple:
        return tuple(sorted(self.qois)), self.sweeps


@dataclass(frozen=True)
class SystemOutput:
    V_cc: float
    thrust_uncorrected: float = float("nan")
    thrust_corrected: float = float("nan")
    I_D: float = float("nan")
    I_B: float = float("nan")
    divergence_angle: float = float("nan")
    z: Optional[np.ndarray] = None
    u_ion: Optional[np.ndarray] = None
    nu_anom: Optional[np.ndarray] = None
    j_ion: dict[float, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    thruster: Optional[ThrusterOutput] = field(default=None, compare=False, repr=False)

    def scalar(self, qoi: str) -> float:
        match qoi:
            case "V_cc":
                return self.V_cc
            case "T_c":
                return self.thrust_corrected
            case "I_D":
                return self.I_D
        raise KeyError(f"{qoi} is not a scalar QoI")

    def values(
        self,
        qoi: str,
        coords: Optional[np.ndarray] = None,
        radius: Optional[float] = None,
    ) -> np.ndarray:
        """Model output for one QoI at observation coordinates, linearly interpolated."""
        if qoi in SCALAR_QOIS:
            return np.array([self.scalar(qoi)])
        if qoi == "u_ion":
            if self.u_ion is None:
                raise KeyError("Ion velocity was not requested")
            return np.interp(coords, self.z, self.u_ion)
        if qoi == "nu_anom":
            if self.nu_anom is None:
                raise KeyError("Anomalous collision frequency was not requested")
            return np.interp(coords, self.z, self.nu_anom)
        if qoi == "j_ion":
            for r, (phi, j) in self.j_ion.items():
                if np.isclose(r, radius, rtol=1e-9, atol=0.0):
                    return np.interp(coords, phi, j)
            raise KeyError(f"No j_ion sweep at r={radius} m")
        raise KeyError(f"Unknown QoI {qoi}")


class SystemModel:
    """
    The coupled cathode -> thruster -> plume model y = f(theta, d). Evaluates
    only the components the request needs, and caches outputs by exact
    (theta, condition, request) match.
    """

    def __init__(
        self,
        geometry: ThrusterGeometry,
        field: MagneticProfile,
        propellant: PropellantSpec,
        settings: Optional[SolverSettings] = None,
        cex_cross_section: float = CEX_CROSS_SECTION,
        divergence_radius: float = 1.0,
        angle_tolerance: float = ANGLE_TOLERANCE,
        use_cache: bool = True,
        cache_size: int = 1024,
    ) -> None:
        if divergence_radius <= 0.0:
            raise ConfigurationError("Divergence radius must be positive")
        self.geometry = geometry
        self.field = field
        self.propellant = propellant
        self.settings = settings or SolverSettings()
        self.cex_cross_section = cex_cross_section
        self.divergence_radius = divergence_radius
        self.angle_tolerance = angle_tolerance
        self.use_cache = use_cache
        self.cache_size = cache_size
        self._cache: OrderedDict[str, SystemOutput] = OrderedDict()
        self._executor: Optional[Executor] = None
        self.evaluations = 0
        self.cache_hits = 0
        self.failures = 0

    def __getstate__(self) -> dict[str, Any]:
        state = self.__dict__.copy()
        state["_cache"] = OrderedDict()
        state["_executor"] = None
        return state

    def __repr__(self) -> str:
        return (
            f"SystemModel(propellant={self.propellant.species_name}, "
            f"cells={self.settings.cells}, shielded={self.geometry.wall_shielded})"
        )

    @classmethod
    def from_config(
        cls, config: Mapping[str, Any], root_folder: Path = Path.cwd()
    ) -> Self:
        try:
            thruster = config["thruster"]
        except KeyError:
            raise ConfigurationError("Missing [thruster] section")
        try:
            field_config = thruster["magnetic_field"]
        except KeyError:
            raise ConfigurationError("Missing [thruster.magnetic_field] section")

        propellant_name = thruster.get("propellant", "xenon")
        if propellant_name.endswith(".toml"):
            propellant_name = root_folder / propellant_name
        plume = config.get("plume", {})
        return cls(
            geometry=ThrusterGeometry.from_config(thruster),
            field=MagneticProfile.from_config(field_config),
            propellant=load_propellant(propellant_name),
            settings=SolverSettings.from_config(thruster.get("numerics", {})),
            cex_cross_section=float(plume.get("cex_cross_section", CEX_CROSS_SECTION)),
            divergence_radius=float(plume.get("divergence_radius", 1.0)),
            angle_tolerance=float(plume.get("angle_tolerance", ANGLE_TOLERANCE)),
        )

    @property
    def fingerprint(self) -> str:
        return fingerprint(
            self.geometry,
            self.field,
            self.propellant.species_name,
            self.propellant.ionization_rates,
            self.settings,
            self.cex_cross_section,
            self.divergence_radius,
        )

    def with_settings(self, settings: SolverSettings) -> Self:
        return type(self)(
            self.geometry,
            self.field,
            self.propellant,
            settings,
            self.cex_cross_section,
            self.divergence_radius,
            self.angle_tolerance,
            self.use_cache,
            self.cache_size,
        )

    # Worker pool

    def open_pool(self, workers: int) -> None:
        self.close_pool()
        if workers > 1:
            self._executor = ProcessPoolExecutor(max_workers=workers)

    def close_pool(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self) -> Self:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close_pool()

    # Evaluation

    def _cache_key(
        self, theta: ParameterSet, cond: OperatingCondition, request: OutputRequest
    ) -> str:
        return fingerprint(theta.to_vector(), cond.key, request.cache_key)

    def _compute(
        self, theta: ParameterSet, cond: OperatingCondition, request: OutputRequest
    ) -> SystemOutput:
        values: dict[str, Any] = {}
        for component in request.components:
            match component:
                case "cathode":
                    values["V_cc"] = coupling_voltage(
                        CathodeParams.from_parameters(theta), cond.background_pressure
                    )
                case "thruster":
                    result = solve_discharge(
                        self.geometry,
                        self.field,
                        self.propellant,
                        ThrusterParams.from_parameters(theta),
                        cond,
                        values["V_cc"],
                        theta.T_ec,
                        self.settings,
                    )
                    if result.ion_beam_current < 0.0 or result.discharge_current < 0.0:
                        raise DomainError(
                            f"Discharge solution carries a negative current: "
                            f"I_D={result.discharge_current:.3g} A, "
                            f"I_B={result.ion_beam_current:.3g} A"
                        )
                    values.update(
                        thrust_uncorrected=result.thrust_uncorrected,
                        I_D=result.discharge_current,
                        I_B=result.ion_beam_current,
                        z=result.z,
                        u_ion=result.ion_velocity,
                        nu_anom=result.extra_columns["inverse_hall"]
                        / BOHM_COEFFICIENT,
                        thruster=result,
                    )
                case "plume":
                    plume = PlumeParams.from_parameters(theta, self.cex_cross_section)
                    phi_d = plume_divergence(
                        cond.background_pressure,
                        plume,
                        self.divergence_radius,
                        self.angle_tolerance,
                    )
                    values["divergence_angle"] = phi_d
                    values["thrust_corrected"] = corrected_thrust(
                        values["thrust_uncorrected"], phi_d
                    )
                    values["j_ion"] = {
                        r: (
                            np.array(phi),
                            np.atleast_1d(
                                current_density(
                                    r,
                                    np.array(phi),
                                    values["I_B"],
                                    cond.background_pressure,
                                    plume,
                                    self.angle_tolerance,
                                )
                            ),
                        )
                        for r, phi in request.sweeps
                    }
        return SystemOutput(**values)

    def evaluate(
        self,
        theta: ParameterSet,
        cond: OperatingCondition,
        request: Optional[OutputRequest] = None,
    ) -> SystemOutput:
        request = request or OutputRequest()
        key = self._cache_key(theta, cond, request)
        if self.use_cache and key in self._cache:
            self.cache_hits += 1
            self._cache.move_to_end(key)
            return self._cache[key]
        self.evaluations += 1
        output = self._compute(theta, cond, request)
        self._remember(key, output)
        return output

    def evaluate_many(
        self,
        points: Sequence[tuple[ParameterSet, OperatingCondition]],
        requests: Optional[OutputRequest | Sequence[OutputRequest]] = None,
    ) -> list[SystemOutput | HallcalError]:
        """
        Evaluate independent points, on the worker pool when one is open.
        Either one request for every point or one request per point. Results
        come back in input order. Failed evaluations are returned as the error
        that stopped them.
        """
        if requests is None or isinstance(requests, OutputRequest):
            requests = [requests or OutputRequest()] * len(points)
        if len(requests) != len(points):
            raise ValueError(f"{len(requests)} requests for {len(points)} points")
        results: list[Optional[SystemOutput | HallcalError]] = [None] * len(points)
        keys = [
            self._cache_key(theta, cond, request)
            for (theta, cond), request in zip(points, requests)
        ]
        pending = []
        for i, key in enumerate(keys):
            if self.use_cache and key in self._cache:
                self.cache_hits += 1
                results[i] = self._cache[key]
            else:
                pending.append(i)

        thetas = [points[i][0] for i in pending]
        conds = [points[i][1] for i in pending]
        todo_requests = [requests[i] for i in pending]
        if self._executor is not None and len(pending) > 1:
            computed = list(
                self._executor.map(
                    _evaluate_point, repeat(self), thetas, conds, todo_requests
                )
            )
        else:
            computed = list(
                map(_evaluate_point, repeat(self), thetas, conds, todo_requests)
            )

        for i, value in zip(pending, computed):
            results[i] = value
            self.evaluations += 1
            if isinstance(value, HallcalError):
                self.failures += 1
                logger.warning("Model evaluation failed at %s: %s", points[i][1], value)
            else:
                self._remember(keys[i], value)
        return results

    def _remember(self, key: str, output: SystemOutput) -> None:
        if not self.use_cache:
            return
        self._cache[key] = output
        while len(self._cache) > self.cache_size:
            self._cache.popitem(last=False)

    def clear_cache(self) -> None:
        self._cache.clear()


def _evaluate_point(
    model: SystemModel,
    theta: ParameterSet,
    cond: OperatingCondition,
    request: OutputRequest,
) -> SystemOutput | HallcalError:
    try:
        return model._compute(theta, cond, request)
    except (SolverError, DomainError) as e:
        return e
