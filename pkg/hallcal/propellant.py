from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Self
import tomllib

import numpy as np
from scipy import constants as phy_const

from .errors import ConfigurationError


BUNDLED_PROPELLANTS = ("xenon", "krypton")


@dataclass(frozen=True, eq=False)
class PropellantSpec:
    species_name: str
    ion_mass: float  # kg
    ionization_energy_cost: float  # eV
    ionization_temperatures: np.ndarray  # eV
    ionization_rates: np.ndarray  # m^3/s
    collision_temperatures: np.ndarray  # eV
    collision_rates: np.ndarray  # m^3/s

    def __post_init__(self) -> None:
        for label, T, k in (
            ("ionization", self.ionization_temperatures, self.ionization_rates),
            ("momentum transfer", self.collision_temperatures, self.collision_rates),
        ):
            if len(T) != len(k) or len(T) < 2:
                raise ConfigurationError(
                    f"{self.species_name}: {label} table needs matching columns "
                    f"with at least two rows"
                )
            if np.any(np.diff(T) <= 0.0):
                raise ConfigurationError(
                    f"{self.species_name}: {label} temperatures must increase"
                )
            if np.any(k < 0.0):
                raise ConfigurationError(
                    f"{self.species_name}: {label} rates must be nonnegative"
                )
        if np.any(np.diff(self.ionization_rates) < 0.0):
            raise ConfigurationError(
                f"{self.species_name}: ionization rates must be nondecreasing in T_e"
            )

    def ionization_rate(self, T_e: np.ndarray) -> np.ndarray:
        return np.interp(T_e, self.ionization_temperatures, self.ionization_rates)

    def collision_rate(self, T_e: np.ndarray) -> np.ndarray:
        return np.interp(T_e, self.collision_temperatures, self.collision_rates)

    def with_ionization_table(self, T_e: np.ndarray, k: np.ndarray) -> Self:
        return type(self)(
            species_name=self.species_name,
            ion_mass=self.ion_mass,
            ionization_energy_cost=self.ionization_energy_cost,
            ionization_temperatures=np.asarray(T_e, dtype=float),
            ionization_rates=np.asarray(k, dtype=float),
            collision_temperatures=self.collision_temperatures,
            collision_rates=self.collision_rates,
        )

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        try:
            name = config["name"]
            ionization = config["ionization"]
            collisions = config["momentum_transfer"]
            ion_mass = float(config["atomic_mass"]) * phy_const.atomic_mass
            cost = float(config["ionization_energy_cost"])
        except KeyError as e:
            raise ConfigurationError(f"Missing {e.args[0]} in propellant table") from e

        if "T_e" in ionization:
            T_iz = np.asarray(ionization["T_e"], dtype=float)
            k_iz = np.asarray(ionization["k"], dtype=float)
        elif ionization.get("fit") == "quarter-power-arrhenius":
            E_iz = float(config["ionization_potential"])
            T_iz = np.geomspace(
                ionization["T_min"], ionization["T_max"], int(ionization["points"])
            )
            k_iz = (
                float(ionization["A"])
                * (1.5 * T_iz / E_iz) ** 0.25
                * np.exp(-4.0 * E_iz / (3.0 * T_iz))
            )
        else:
            raise ConfigurationError(
                f"Unknown ionization fit {ionization.get('fit')!r} for {name}"
            )

        return cls(
            species_name=name,
            ion_mass=ion_mass,
            ionization_energy_cost=cost,
            ionization_temperatures=T_iz,
            ionization_rates=k_iz,
            collision_temperatures=np.asarray(collisions["T_e"], dtype=float),
            collision_rates=np.asarray(collisions["k"], dtype=float),
        )


def load_propellant(name_or_path: str | Path) -> PropellantSpec:
    """Load a bundled propellant by name, or a propellant TOML file by path."""
    if str(name_or_path) in BUNDLED_PROPELLANTS:
        text = (
            resources.files("hallcal.data")
            .joinpath("propellants", f"{name_or_path}.toml")
            .read_text("utf-8")
        )
    else:
        path = Path(name_or_path)
        if not path.is_file():
            raise ConfigurationError(
                f"Unknown propellant {name_or_path!r}; bundled: "
                f"{', '.join(BUNDLED_PROPELLANTS)}"
            )
        text = path.read_text("utf-8")
    return PropellantSpec.from_config(tomllib.loads(text))
