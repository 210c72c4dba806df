from collections import namedtuple
from hashlib import sha256
from typing import Any, Iterable, Optional, Self

import numpy as np

from .errors import ConfigurationError


TORR = 133.32236842105263  # Pa

# unit tag -> (quantity, factor to SI)
UNITS: dict[str, tuple[str, float]] = {
    "Pa": ("pressure", 1.0),
    "Torr": ("pressure", TORR),
    "mTorr": ("pressure", 1e-3 * TORR),
    "uTorr": ("pressure", 1e-6 * TORR),
    "μTorr": ("pressure", 1e-6 * TORR),
    "kg/s": ("mass_flow", 1.0),
    "mg/s": ("mass_flow", 1e-6),
    "V": ("voltage", 1.0),
    "eV": ("energy", 1.0),
    "A": ("current", 1.0),
    "mA": ("current", 1e-3),
    "N": ("force", 1.0),
    "mN": ("force", 1e-3),
    "m/s": ("velocity", 1.0),
    "km/s": ("velocity", 1e3),
    "m": ("length", 1.0),
    "cm": ("length", 1e-2),
    "mm": ("length", 1e-3),
    "rad": ("angle", 1.0),
    "deg": ("angle", np.pi / 180.0),
    "A/m2": ("current_density", 1.0),
    "mA/cm2": ("current_density", 10.0),
    "m-3": ("number_density", 1.0),
    "m-3/Pa": ("density_slope", 1.0),
    "rad/Pa": ("angle_slope", 1.0),
    "K": ("temperature", 1.0),
    "1": ("dimensionless", 1.0),
}


def unit_factor(unit: str, quantity: Optional[str] = None) -> float:
    try:
        kind, factor = UNITS[unit]
    except KeyError:
        raise ConfigurationError(f"Unknown unit {unit!r}")
    if quantity is not None and kind != quantity:
        raise ConfigurationError(f"Unit {unit!r} is not a unit of {quantity}")
    return factor


def to_si(value: float, unit: str, quantity: Optional[str] = None) -> float:
    return float(value) * unit_factor(unit, quantity)


def from_si(value: float, unit: str, quantity: Optional[str] = None) -> float:
    return float(value) / unit_factor(unit, quantity)


def quantity_from_config(
    entry: Any, quantity: str, default_unit: Optional[str] = None
) -> float:
    """
    Read a dimensional value from a config entry. Either a bare number (only
    when the quantity has a default unit) or an inline table {value, unit}.
    """
    if isinstance(entry, dict):
        try:
            return to_si(entry["value"], entry["unit"], quantity)
        except KeyError as e:
            raise ConfigurationError(f"Missing {e.args[0]} in {entry!r}") from e
    if default_unit is None:
        raise ConfigurationError(
            f"A {quantity.replace('_', ' ')} needs an explicit unit, got {entry!r}"
        )
    return to_si(entry, default_unit, quantity)


def format_number(value: float) -> str:
    return f"{float(value):.12g}"


def fingerprint(*parts: Any) -> str:
    h = sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part, dtype=np.float64).tobytes())
        elif isinstance(part, (bytes, bytearray)):
            h.update(part)
        else:
            h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


class DatasetId(namedtuple("DatasetId", ["thruster_id", "dataset"])):
    def __str__(self) -> str:
        return f"{self.thruster_id}::{self.dataset}"

    @classmethod
    def from_string(cls, string: str, prefix: Optional[str] = None) -> Self:
        parts = tuple(string.split("::", 1))
        if len(parts) == 2:
            return cls.from_tuple(parts)
        elif len(parts) == 1 and prefix:
            return cls(prefix, parts[0])
        else:
            raise ValueError(f"Invalid dataset id: {string}")

    @classmethod
    def from_tuple(cls, tuple: tuple[str, str]) -> Self:
        return cls(*tuple)


def spawn_rngs(seed: Optional[int], n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def unique_in_order(items: Iterable[Any]) -> list[Any]:
    seen: dict[Any, None] = {}
    for item in items:
        seen.setdefault(item, None)
    return list(seen)
