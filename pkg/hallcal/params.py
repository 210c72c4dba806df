"""
Operating conditions, the epistemic parameter vector and its priors.

Pressures are stored in pascals everywhere. Log-uniform parameters (c4, c5)
are stored in linear space; their priors are defined on the base-10 exponent,
and the sampler works on that exponent (see `PriorCollection.to_transformed`).
"""

from dataclasses import dataclass, field, fields, replace
from typing import Any, Literal, Mapping, Optional, Self, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigurationError
from .utils import TORR, quantity_from_config, to_si


PriorKind = Literal["uniform", "log-uniform", "relative-normal"]
PRIOR_KINDS: tuple[str, ...] = ("uniform", "log-uniform", "relative-normal")

MAX_BACKGROUND_PRESSURE = 1.0  # Pa


@dataclass(frozen=True)
class OperatingCondition:
    discharge_voltage: float  # V
    background_pressure: float  # Pa
    anode_mass_flow: float  # kg/s

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0.0:
                raise ConfigurationError(
                    f"{f.name} must be strictly positive, got {value!r}"
                )
        if self.background_pressure >= MAX_BACKGROUND_PRESSURE:
            raise ConfigurationError(
                f"Background pressure {self.background_pressure:g} Pa is outside "
                f"the vacuum-facility regime (< {MAX_BACKGROUND_PRESSURE:g} Pa)"
            )

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        try:
            return cls(
                discharge_voltage=quantity_from_config(
                    config["discharge_voltage"], "voltage", default_unit="V"
                ),
                background_pressure=quantity_from_config(
                    config["background_pressure"], "pressure"
                ),
                anode_mass_flow=quantity_from_config(
                    config["anode_mass_flow"], "mass_flow"
                ),
            )
        except KeyError as e:
            raise ConfigurationError(f"Missing {e.args[0]} in operating condition")

    @classmethod
    def from_units(
        cls,
        discharge_voltage: float,
        background_pressure: float,
        anode_mass_flow: float,
        pressure_unit: str = "Torr",
        flow_unit: str = "mg/s",
    ) -> Self:
        return cls(
            discharge_voltage=float(discharge_voltage),
            background_pressure=to_si(background_pressure, pressure_unit, "pressure"),
            anode_mass_flow=to_si(anode_mass_flow, flow_unit, "mass_flow"),
        )

    @property
    def key(self) -> tuple[float, float, float]:
        return (self.discharge_voltage, self.background_pressure, self.anode_mass_flow)

    @property
    def background_pressure_torr(self) -> float:
        return self.background_pressure / TORR

    def __str__(self) -> str:
        return (
            f"V_d={self.discharge_voltage:g} V, "
            f"P_B={self.background_pressure_torr * 1e6:.4g} uTorr, "
            f"m_a={self.anode_mass_flow * 1e6:.4g} mg/s"
        )


@dataclass(frozen=True)
class ParameterInfo:
    component: Literal["cathode", "thruster", "plume"]
    unit: str
    description: str


PARAMETER_INFO: dict[str, ParameterInfo] = {
    "T_ec": ParameterInfo("cathode", "eV", "Cathode electron temperature"),
    "V_vac": ParameterInfo("cathode", "V", "Vacuum coupling voltage"),
    "P_T": ParameterInfo("cathode", "Pa", "Base pressure"),
    "P_star": ParameterInfo("cathode", "Pa", "Turning point pressure"),
    "alpha_anom": ParameterInfo("thruster", "-", "Base inverse Hall parameter"),
    "beta_anom": ParameterInfo("thruster", "-", "Anomalous transport barrier scale"),
    "z_anom": ParameterInfo("thruster", "L_ch", "Anom. transport barrier location"),
    "L_anom": ParameterInfo("thruster", "L_ch", "Anom. transport barrier width"),
    "dz_anom": ParameterInfo("thruster", "L_ch", "Anom. pressure axial shift scale"),
    "u_n": ParameterInfo("thruster", "m/s", "Neutral axial speed"),
    "c_w": ParameterInfo("thruster", "-", "Electron wall loss scale"),
    "f_n": ParameterInfo("thruster", "-", "Neutral ingestion scale"),
    "c0": ParameterInfo("plume", "-", "Ratio of main to scattered currents"),
    "c1": ParameterInfo("plume", "-", "Ratio of main to scattered div. angles"),
    "c2": ParameterInfo("plume", "rad/Pa", "Slope of div. angle vs. pressure"),
    "c3": ParameterInfo("plume", "rad", "Intercept of div. angle vs. pressure"),
    "c4": ParameterInfo("plume", "m-3/Pa", "Slope of neutral density vs. P_B"),
    "c5": ParameterInfo("plume", "m-3", "Intercept of neutral density vs. P_B"),
}

PARAMETER_NAMES: tuple[str, ...] = tuple(PARAMETER_INFO)


@dataclass(frozen=True)
class ParameterSet:
    # cathode
    T_ec: float
    V_vac: float
    P_T: float
    P_star: float
    # thruster
    alpha_anom: float
    beta_anom: float
    z_anom: float
    L_anom: float
    dz_anom: float
    u_n: float
    c_w: float
    f_n: float
    # plume
    c0: float
    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAMETER_NAMES], dtype=float)

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> Self:
        if len(vector) != len(PARAMETER_NAMES):
            raise ValueError(
                f"Expected {len(PARAMETER_NAMES)} parameters, got {len(vector)}"
            )
        return cls(**{n: float(v) for n, v in zip(PARAMETER_NAMES, vector)})

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) -> Self:
        unknown = set(mapping) - set(PARAMETER_NAMES)
        if unknown:
            raise ConfigurationError(f"Unknown parameters {sorted(unknown)}")
        missing = set(PARAMETER_NAMES) - set(mapping)
        if missing:
            raise ConfigurationError(f"Missing parameters {sorted(missing)}")
        return cls(**{n: float(mapping[n]) for n in PARAMETER_NAMES})

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in PARAMETER_NAMES}

    def replace(self, **changes: float) -> Self:
        return replace(self, **changes)


@dataclass(frozen=True)
class PriorSpec:
    kind: PriorKind
    low: float = float("nan")
    high: float = float("nan")
    relative_sigma: float = float("nan")
    nominal: float = float("nan")

    def __post_init__(self) -> None:
        if self.kind not in PRIOR_KINDS:
            raise ConfigurationError(f"Unknown prior kind {self.kind!r}")
        if self.kind == "relative-normal":
            if not self.relative_sigma > 0.0:
                raise ConfigurationError(
                    f"relative_sigma must be positive, got {self.relative_sigma!r}"
                )
            if not np.isfinite(self.nominal) or self.nominal == 0.0:
                raise ConfigurationError(
                    "A relative-normal prior needs a finite, nonzero nominal value"
                )
        elif not self.low < self.high:
            raise ConfigurationError(
                f"Prior bounds must satisfy low < high, got ({self.low}, {self.high})"
            )

    @property
    def sigma(self) -> float:
        return self.relative_sigma * abs(self.nominal)

    def sample(self, rng: np.random.Generator) -> float:
        match self.kind:
            case "uniform":
                return float(rng.uniform(self.low, self.high))
            case "log-uniform":
                return float(10.0 ** rng.uniform(self.low, self.high))
            case "relative-normal":
                return float(rng.normal(self.nominal, self.sigma))

    def contains(self, value: float) -> bool:
        match self.kind:
            case "uniform":
                return self.low <= value <= self.high
            case "log-uniform":
                return value > 0.0 and self.low <= np.log10(value) <= self.high
            case "relative-normal":
                return bool(np.isfinite(value))

    def log_density(self, value: float) -> float:
        if not self.contains(value):
            return -np.inf
        match self.kind:
            case "uniform":
                return -np.log(self.high - self.low)
            case "log-uniform":
                return -np.log((self.high - self.low) * np.log(10.0) * value)
            case "relative-normal":
                return float(stats.norm.logpdf(value, self.nominal, self.sigma))

    # The sampler moves in a transformed coordinate: the exponent for
    # log-uniform priors, the value itself otherwise.
    def transform(self, value: float) -> float:
        if self.kind == "log-uniform":
            return float(np.log10(value)) if value > 0.0 else -np.inf
        return float(value)

    def untransform(self, u: float) -> float:
        if self.kind == "log-uniform":
            return float(10.0**u)
        return float(u)

    def log_jacobian(self, u: float) -> float:
        """log |d value / d u| at the transformed coordinate u."""
        if self.kind == "log-uniform":
            return float(u * np.log(10.0) + np.log(np.log(10.0)))
        return 0.0

    @property
    def width(self) -> float:
        """Width of the prior in the transformed coordinate."""
        if self.kind == "relative-normal":
            return 4.0 * self.sigma
        return self.high - self.low

    @property
    def midpoint(self) -> float:
        match self.kind:
            case "uniform":
                return 0.5 * (self.low + self.high)
            case "log-uniform":
                return float(10.0 ** (0.5 * (self.low + self.high)))
            case "relative-normal":
                return self.nominal

    def describe(self) -> str:
        match self.kind:
            case "uniform":
                return f"U({self.low:g}, {self.high:g})"
            case "log-uniform":
                return f"U({self.low:g}, {self.high:g}) (10^x)"
            case "relative-normal":
                return f"N({self.nominal:g}, {100 * self.relative_sigma:g}%)"

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        config = dict(config)
        kind = config.pop("prior", "uniform")
        unit = config.pop("unit", None)
        factor = 1.0
        if unit is not None:
            if kind == "log-uniform" and unit not in ("1", "m-3", "m-3/Pa"):
                raise ConfigurationError(
                    f"Log-uniform bounds are SI exponents, unit {unit!r} not allowed"
                )
            factor = to_si(1.0, unit)
        scale = factor if kind != "log-uniform" else 1.0
        low = float(config.pop("low", float("nan"))) * scale
        high = float(config.pop("high", float("nan"))) * scale
        relative_sigma = float(config.pop("relative_sigma", float("nan")))
        nominal = float(config.pop("nominal", float("nan"))) * scale
        if config:
            raise ConfigurationError(f"Unknown prior keys {sorted(config)}")
        return cls(kind, low, high, relative_sigma, nominal)


def sample_prior(spec: PriorSpec, rng: np.random.Generator) -> float:
    return spec.sample(rng)


_uTorr = 1e-6 * TORR

DEFAULT_PRIORS: dict[str, PriorSpec] = {
    "T_ec": PriorSpec("uniform", 1.0, 6.0),
    "V_vac": PriorSpec("uniform", 0.0, 60.0),
    "P_T": PriorSpec("uniform", 10.0 * _uTorr, 100.0 * _uTorr),
    "P_star": PriorSpec("uniform", 10.0 * _uTorr, 200.0 * _uTorr),
    "alpha_anom": PriorSpec("uniform", 0.0, 1.0),
    "beta_anom": PriorSpec("uniform", 0.0, 1.0),
    "z_anom": PriorSpec("uniform", 0.75, 1.5),
    "L_anom": PriorSpec("uniform", 0.0, 0.5),
    "dz_anom": PriorSpec("uniform", 0.0, 0.5),
    "u_n": PriorSpec("uniform", 100.0, 500.0),
    "c_w": PriorSpec("uniform", 0.5, 1.5),
    "f_n": PriorSpec("uniform", 1.0, 10.0),
    "c0": PriorSpec("uniform", 0.0, 1.0),
    "c1": PriorSpec("uniform", 0.1, 0.9),
    "c2": PriorSpec("uniform", -15.0, 15.0),
    "c3": PriorSpec("uniform", 0.2, np.pi / 2),
    "c4": PriorSpec("log-uniform", 18.0, 22.0),
    "c5": PriorSpec("log-uniform", 14.0, 18.0),
}


@dataclass(frozen=True)
class PriorCollection:
    """Independent marginal priors, one per named parameter, in a fixed order."""

    specs: Mapping[str, PriorSpec] = field(default_factory=lambda: dict(DEFAULT_PRIORS))

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", dict(self.specs))

    @classmethod
    def from_config(
        cls, config: Mapping[str, Mapping[str, Any]], defaults: bool = True
    ) -> Self:
        specs = dict(DEFAULT_PRIORS) if defaults else {}
        for name, entry in config.items():
            if defaults and name not in PARAMETER_INFO:
                raise ConfigurationError(f"Unknown parameter {name!r}")
            try:
                specs[name] = PriorSpec.from_config(entry)
            except ConfigurationError as e:
                raise ConfigurationError(f"Parameter {name}: {e}") from e
        return cls(specs)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.specs)

    def __len__(self) -> int:
        return len(self.specs)

    def __getitem__(self, name: str) -> PriorSpec:
        return self.specs[name]

    def _vector(self, theta: "ParameterSet | Sequence[float]") -> np.ndarray:
        if isinstance(theta, ParameterSet):
            return np.array([getattr(theta, n) for n in self.names], dtype=float)
        return np.asarray(theta, dtype=float)

    def log_density(self, theta: "ParameterSet | Sequence[float]") -> float:
        total = 0.0
        for spec, value in zip(self.specs.values(), self._vector(theta)):
            lp = spec.log_density(value)
            if lp == -np.inf:
                return -np.inf
            total += lp
        return float(total)

    def contains(self, theta: "ParameterSet | Sequence[float]") -> bool:
        return all(
            spec.contains(v) for spec, v in zip(self.specs.values(), self._vector(theta))
        )

    def sample_vector(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([sample_prior(spec, rng) for spec in self.specs.values()])

    def sample(self, rng: np.random.Generator) -> ParameterSet:
        return ParameterSet.from_mapping(dict(zip(self.names, self.sample_vector(rng))))

    def midpoint(self) -> np.ndarray:
        return np.array([spec.midpoint for spec in self.specs.values()])

    def to_transformed(self, vector: Sequence[float]) -> np.ndarray:
        return np.array(
            [spec.transform(v) for spec, v in zip(self.specs.values(), vector)]
        )

    def from_transformed(self, u: Sequence[float]) -> np.ndarray:
        return np.array(
            [spec.untransform(x) for spec, x in zip(self.specs.values(), u)]
        )

    def log_jacobian(self, u: Sequence[float]) -> float:
        return float(
            sum(spec.log_jacobian(x) for spec, x in zip(self.specs.values(), u))
        )

    def transformed_widths(self) -> np.ndarray:
        return np.array([spec.width for spec in self.specs.values()])

    def log_kinds(self) -> list[bool]:
        return [spec.kind == "log-uniform" for spec in self.specs.values()]


def log_prior_density(
    theta: ParameterSet | Sequence[float], specs: PriorCollection
) -> float:
    return specs.log_density(theta)


@dataclass(frozen=True)
class AleatoricSpec:
    """Relative standard deviations of the operating-condition perturbations."""

    discharge_voltage: float = 0.02
    background_pressure: float = 0.05
    anode_mass_flow: float = 0.02

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0.0:
                raise ConfigurationError(f"Aleatoric sigma {f.name} must be >= 0")

    @classmethod
    def from_config(cls, config: Mapping[str, float]) -> Self:
        unknown = set(config) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigurationError(f"Unknown aleatoric keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in config.items()})

    def scaled(self, factor: float) -> Self:
        return type(self)(
            **{f.name: getattr(self, f.name) * factor for f in fields(self)}
        )

    @property
    def is_zero(self) -> bool:
        return all(getattr(self, f.name) == 0.0 for f in fields(self))


def _positive_normal(
    rng: np.random.Generator, nominal: float, relative_sigma: float
) -> float:
    if relative_sigma == 0.0:
        return nominal
    while True:
        value = float(rng.normal(nominal, relative_sigma * nominal))
        if value > 0.0:
            return value


def perturb_condition(
    nominal: OperatingCondition,
    rng: np.random.Generator,
    sigmas: Optional[AleatoricSpec] = None,
) -> OperatingCondition:
    sigmas = sigmas or AleatoricSpec()
    return OperatingCondition(
        discharge_voltage=_positive_normal(
            rng, nominal.discharge_voltage, sigmas.discharge_voltage
        ),
        background_pressure=_positive_normal(
            rng, nominal.background_pressure, sigmas.background_pressure
        ),
        anode_mass_flow=_positive_normal(
            rng, nominal.anode_mass_flow, sigmas.anode_mass_flow
        ),
    )


def parameters_from_config(config: Mapping[str, Any]) -> ParameterSet:
    """Read a full parameter set; pressures may carry unit tags."""
    values: dict[str, float] = {}
    for name, entry in config.items():
        if isinstance(entry, dict):
            values[name] = to_si(entry["value"], entry["unit"])
        else:
            values[name] = float(entry)
    return ParameterSet.from_mapping(values)
