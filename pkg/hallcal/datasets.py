"""
Observation datasets.

A dataset is stored as one plain-text file per QoI. The file starts with a
header of ``# key = value`` lines (each line is TOML), followed by a line of
column names and whitespace-separated rows::

    # thruster = "SPT-100"
    # dataset = "express"
    # category = "test"
    # qoi = "I_D"
    # units = { V_d = "V", P_B = "Torr", m_a = "mg/s", I_D = "A" }
    V_d  P_B  m_a  I_D
    300  2e-06  4.29  4.5

Condition columns are V_d, P_B and m_a. Profile QoIs carry a coordinate
column: z for u_ion, phi for j_ion (whose sweep radius goes in the header as
``radius``). Every column needs a unit. Rows sharing a condition form one
observation. Lines starting with ``##`` are free comments and are not kept.
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging
from pathlib import Path
from typing import Iterable, Literal, Mapping, Optional, Self, Sequence
import tomllib

import numpy as np

from .errors import ConfigurationError, DatasetParseError, HallcalError
from .params import OperatingCondition, ParameterSet
from .system import (
    QOI_KINDS,
    QOI_QUANTITIES,
    SCALAR_QOIS,
    OutputRequest,
    SystemModel,
    SystemOutput,
)
from .utils import (
    DatasetId,
    fingerprint,
    format_number,
    from_si,
    quantity_from_config,
    to_si,
    unique_in_order,
)


logger = logging.getLogger(__name__)

Category = Literal["training", "test"]
CATEGORIES: tuple[str, ...] = ("training", "test")
DATASET_SUFFIX = ".dat"

CONDITION_COLUMNS: dict[str, str] = {
    "V_d": "voltage",
    "P_B": "pressure",
    "m_a": "mass_flow",
}
COORDINATE_COLUMNS: dict[str, tuple[str, str]] = {
    "u_ion": ("z", "length"),
    "j_ion": ("phi", "angle"),
}
DEFAULT_UNITS: dict[str, str] = {
    "V_d": "V",
    "P_B": "Torr",
    "m_a": "mg/s",
    "z": "m",
    "phi": "deg",
    "V_cc": "V",
    "T_c": "mN",
    "I_D": "A",
    "u_ion": "m/s",
    "j_ion": "A/m2",
}
HEADER_KEYS = ("thruster", "dataset", "category", "qoi", "noise_percent", "radius", "units")


@dataclass(eq=False)
class Observation:
    qoi: str
    condition: OperatingCondition
    values: np.ndarray
    coords: Optional[np.ndarray] = None
    radius: Optional[float] = None  # m, j_ion only
    noise_percent: Optional[float] = None

    def __post_init__(self) -> None:
        if self.qoi not in QOI_KINDS:
            raise ConfigurationError(f"Unknown QoI {self.qoi!r}")
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError(f"{self.qoi} values must be finite")
        if self.qoi in SCALAR_QOIS:
            if len(self.values) != 1:
                raise ConfigurationError(f"{self.qoi} is a scalar QoI")
        else:
            if self.coords is None:
                raise ConfigurationError(f"{self.qoi} observations need coordinates")
            self.coords = np.asarray(self.coords, dtype=float)
            if self.coords.shape != self.values.shape:
                raise ConfigurationError(
                    f"{self.qoi}: {len(self.coords)} coordinates for "
                    f"{len(self.values)} values"
                )
        if self.qoi == "j_ion" and (self.radius is None or self.radius <= 0.0):
            raise ConfigurationError("j_ion observations need a positive radius")

    def __len__(self) -> int:
        return len(self.values)

    def model_values(self, output: SystemOutput) -> np.ndarray:
        return output.values(self.qoi, self.coords, self.radius)


@dataclass(frozen=True)
class FileLayout:
    """How one QoI of a dataset is written: column order and display units."""

    columns: tuple[str, ...]
    units: Mapping[str, str]

    @classmethod
    def default(cls, qoi: str) -> Self:
        columns = ("V_d", "P_B", "m_a")
        if qoi in COORDINATE_COLUMNS:
            columns += (COORDINATE_COLUMNS[qoi][0],)
        columns += (qoi,)
        return cls(columns, {c: DEFAULT_UNITS[c] for c in columns})


@dataclass
class Dataset:
    name: str
    thruster_id: str
    category: Category = "training"
    observations: list[Observation] = field(default_factory=list)
    layouts: dict[str, FileLayout] = field(default_factory=dict)
    path: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ConfigurationError(
                f"Dataset category must be one of {CATEGORIES}, got {self.category!r}"
            )
        for qoi in self.qois:
            lengths = {len(o) for o in self.observations_of(qoi)}
            if len(lengths) > 1:
                raise ConfigurationError(
                    f"{self.name}: {qoi} observations have differing lengths "
                    f"{sorted(lengths)}"
                )

    def __repr__(self) -> str:
        return (
            f"Dataset(id={self.id}, category={self.category}, "
            f"observations={len(self.observations)})"
        )

    @property
    def id(self) -> DatasetId:
        return DatasetId(self.thruster_id, self.name)

    @property
    def qois(self) -> list[str]:
        return unique_in_order(o.qoi for o in self.observations)

    @property
    def conditions(self) -> list[OperatingCondition]:
        return unique_in_order(o.condition for o in self.observations)

    def observations_of(self, qoi: str) -> list[Observation]:
        return [o for o in self.observations if o.qoi == qoi]

    def n_q(self, qoi: str) -> int:
        """Number of distinct operating conditions observing the QoI."""
        return len({o.condition for o in self.observations_of(qoi)})

    def m_q(self, qoi: str) -> int:
        observations = self.observations_of(qoi)
        return len(observations[0]) if observations else 0

    @property
    def counts(self) -> dict[str, tuple[int, int]]:
        return {qoi: (self.n_q(qoi), self.m_q(qoi)) for qoi in self.qois}

    def layout(self, qoi: str) -> FileLayout:
        return self.layouts.get(qoi) or FileLayout.default(qoi)

    def to_text(self, qoi: str) -> str:
        return _format_file(self, qoi)

    @cached_property
    def fingerprint(self) -> str:
        return fingerprint(*(self.to_text(qoi) for qoi in self.qois))

    def merge(self, other: Self) -> Self:
        if (self.name, self.thruster_id, self.category) != (
            other.name,
            other.thruster_id,
            other.category,
        ):
            raise ConfigurationError(
                f"Cannot merge {self.id} ({self.category}) "
                f"with {other.id} ({other.category})"
            )
        overlap = set(self.qois) & set(other.qois)
        if overlap:
            raise ConfigurationError(
                f"{self.id}: QoIs {sorted(overlap)} appear in more than one file"
            )
        return type(self)(
            name=self.name,
            thruster_id=self.thruster_id,
            category=self.category,
            observations=[*self.observations, *other.observations],
            layouts={**self.layouts, **other.layouts},
            path=self.path,
        )


def _header_value(value: object) -> str:
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, Mapping):
        return (
            "{ "
            + ", ".join(f"{k} = {_header_value(v)}" for k, v in value.items())
            + " }"
        )
    return format_number(value)


def _column_values(observation: Observation, column: str) -> np.ndarray:
    n = len(observation)
    match column:
        case "V_d":
            return np.full(n, observation.condition.discharge_voltage)
        case "P_B":
            return np.full(n, observation.condition.background_pressure)
        case "m_a":
            return np.full(n, observation.condition.anode_mass_flow)
        case "z" | "phi":
            return observation.coords
    return observation.values


def _format_file(dataset: Dataset, qoi: str) -> str:
    observations = dataset.observations_of(qoi)
    layout = dataset.layout(qoi)
    header: dict[str, object] = {
        "thruster": dataset.thruster_id,
        "dataset": dataset.name,
        "category": dataset.category,
        "qoi": qoi,
    }
    noise = {o.noise_percent for o in observations} - {None}
    if len(noise) > 1:
        raise ConfigurationError(f"{dataset.id}: {qoi} mixes noise levels {noise}")
    if noise:
        header["noise_percent"] = noise.pop()
    if qoi == "j_ion" and observations:
        radii = {o.radius for o in observations}
        if len(radii) > 1:
            raise ConfigurationError(f"{dataset.id}: j_ion mixes sweep radii {radii}")
        header["radius"] = {"value": radii.pop(), "unit": "m"}
    header["units"] = {c: layout.units[c] for c in layout.columns}

    lines = [f"# {key} = {_header_value(value)}" for key, value in header.items()]
    lines.append("  ".join(layout.columns))
    for o in observations:
        columns = [
            [format_number(from_si(v, layout.units[c])) for v in _column_values(o, c)]
            for c in layout.columns
        ]
        lines.extend("  ".join(row) for row in zip(*columns))
    return "\n".join(lines) + "\n"


def _parse_header_line(
    path: Path, number: int, text: str, header: dict[str, object]
) -> None:
    try:
        entry = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise DatasetParseError(path, number, f"invalid header line: {e}") from e
    for key, value in entry.items():
        if key not in HEADER_KEYS:
            raise DatasetParseError(path, number, f"unknown header key {key!r}")
        if key in header:
            raise DatasetParseError(path, number, f"duplicate header key {key!r}")
        header[key] = value


def _expected_columns(qoi: str) -> dict[str, str]:
    columns = dict(CONDITION_COLUMNS)
    if qoi in COORDINATE_COLUMNS:
        name, quantity = COORDINATE_COLUMNS[qoi]
        columns[name] = quantity
    columns[qoi] = QOI_QUANTITIES[qoi]
    return columns


def load_dataset(path: Path | str) -> Dataset:
    """
    Load one dataset file, or every dataset file in a directory merged into one
    dataset. Values are converted to SI.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob(f"*{DATASET_SUFFIX}"))
        if not files:
            raise FileNotFoundError(f"No {DATASET_SUFFIX} files in {path}")
        dataset = _load_file(files[0])
        for f in files[1:]:
            try:
                dataset = dataset.merge(_load_file(f))
            except ConfigurationError as e:
                raise DatasetParseError(f, None, str(e)) from e
        dataset.path = path
        return dataset
    if not path.is_file():
        raise FileNotFoundError(f"Dataset {path} does not exist")
    return _load_file(path)


def _load_file(path: Path) -> Dataset:
    header: dict[str, object] = {}
    columns: Optional[tuple[str, ...]] = None
    columns_line = 0
    rows: list[tuple[int, list[float]]] = []

    for number, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("##"):
            continue
        if stripped.startswith("#"):
            if columns is not None:
                raise DatasetParseError(path, number, "header line after the data")
            if body := stripped[1:].strip():
                _parse_header_line(path, number, body, header)
            continue
        if columns is None:
            columns = tuple(stripped.split())
            columns_line = number
            continue
        fields = stripped.split()
        if len(fields) != len(columns):
            raise DatasetParseError(
                path, number, f"expected {len(columns)} columns, got {len(fields)}"
            )
        try:
            values = [float(v) for v in fields]
        except ValueError as e:
            raise DatasetParseError(path, number, str(e)) from e
        if not all(np.isfinite(values)):
            raise DatasetParseError(path, number, "values must be finite")
        rows.append((number, values))

    for key in ("thruster", "dataset", "qoi"):
        if key not in header:
            raise DatasetParseError(path, None, f"missing header key {key!r}")
    qoi = header["qoi"]
    if qoi not in QOI_KINDS:
        raise DatasetParseError(path, None, f"unknown QoI {qoi!r}")
    category = header.get("category", "training")
    if category not in CATEGORIES:
        raise DatasetParseError(path, None, f"unknown category {category!r}")

    expected = _expected_columns(qoi)
    if columns is None:
        columns = tuple(expected)
        columns_line = None
    if set(columns) != set(expected) or len(columns) != len(expected):
        raise DatasetParseError(
            path,
            columns_line,
            f"columns must be {', '.join(expected)} for {qoi}, got {', '.join(columns)}",
        )
    units = header.get("units", {})
    if not isinstance(units, dict):
        raise DatasetParseError(path, None, "units must be an inline table")
    for column in columns:
        if column not in units:
            raise DatasetParseError(
                path, columns_line, f"missing unit for column {column!r}"
            )
        try:
            to_si(1.0, units[column], expected[column])
        except ConfigurationError as e:
            raise DatasetParseError(path, columns_line, f"{column}: {e}") from e

    noise = header.get("noise_percent")
    radius = None
    try:
        if qoi == "j_ion":
            radius = quantity_from_config(header.get("radius"), "length", "m")
    except (ConfigurationError, TypeError) as e:
        raise DatasetParseError(path, None, f"invalid radius: {e}") from e

    # Group rows by condition, keeping file order.
    grouped: dict[OperatingCondition, list[tuple[int, dict[str, float]]]] = {}
    for number, values in rows:
        record = {c: to_si(v, units[c]) for c, v in zip(columns, values)}
        try:
            condition = OperatingCondition(
                discharge_voltage=record["V_d"],
                background_pressure=record["P_B"],
                anode_mass_flow=record["m_a"],
            )
        except ConfigurationError as e:
            raise DatasetParseError(path, number, str(e)) from e
        grouped.setdefault(condition, []).append((number, record))

    observations = []
    coordinate = COORDINATE_COLUMNS.get(qoi, (None,))[0]
    for condition, records in grouped.items():
        try:
            observations.append(
                Observation(
                    qoi=qoi,
                    condition=condition,
                    values=[r[qoi] for _, r in records],
                    coords=[r[coordinate] for _, r in records] if coordinate else None,
                    radius=radius,
                    noise_percent=None if noise is None else float(noise),
                )
            )
        except ConfigurationError as e:
            raise DatasetParseError(path, records[0][0], str(e)) from e

    try:
        return Dataset(
            name=str(header["dataset"]),
            thruster_id=str(header["thruster"]),
            category=category,
            observations=observations,
            layouts={qoi: FileLayout(columns, {c: units[c] for c in columns})},
            path=path,
        )
    except ConfigurationError as e:
        raise DatasetParseError(path, None, str(e)) from e


def dataset_filename(dataset: Dataset, qoi: str) -> str:
    return f"{dataset.name.replace('/', '_')}_{qoi}{DATASET_SUFFIX}"


def save_dataset(dataset: Dataset, directory: Path | str) -> list[Path]:
    """Write one canonical file per QoI into directory. Returns the paths written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for qoi in dataset.qois:
        target = directory / dataset_filename(dataset, qoi)
        target.write_text(dataset.to_text(qoi), encoding="utf-8")
        written.append(target)
    return written


def save_dataset_file(dataset: Dataset, path: Path | str) -> Path:
    """Write a single-QoI dataset to exactly the given path."""
    if len(dataset.qois) != 1:
        raise ConfigurationError(
            f"{dataset.id} has {len(dataset.qois)} QoIs; use save_dataset"
        )
    path = Path(path)
    path.write_text(dataset.to_text(dataset.qois[0]), encoding="utf-8")
    return path


def discover_dataset_files(directory: Path) -> Iterable[Path]:
    """Dataset files under directory, recursively, in sorted order."""
    yield from sorted(directory.rglob(f"*{DATASET_SUFFIX}"))


def load_datasets(paths: Iterable[Path]) -> list[Dataset]:
    """Load files and directories, merging files that belong to the same dataset."""
    merged: dict[DatasetId, Dataset] = {}
    for path in paths:
        files = list(discover_dataset_files(path)) if path.is_dir() else [path]
        for f in files:
            dataset = load_dataset(f)
            if dataset.id in merged:
                try:
                    merged[dataset.id] = merged[dataset.id].merge(dataset)
                except ConfigurationError as e:
                    raise DatasetParseError(f, None, str(e)) from e
            else:
                merged[dataset.id] = dataset
    return list(merged.values())


def synthesize_dataset(
    model: SystemModel,
    theta_true: ParameterSet,
    conditions: Sequence[OperatingCondition],
    noise_percent: float,
    seed: Optional[int],
    qois: Sequence[str] = QOI_KINDS,
    name: str = "synthetic",
    thruster_id: str = "synthetic",
    category: Category = "training",
    z: Optional[Sequence[float]] = None,
    sweep_radius: float = 1.0,
    sweep_angles: Optional[Sequence[float]] = None,
) -> Dataset:
    """
    Observations y = f(theta_true, d) (1 + noise_percent/100 * N(0, 1)) at every
    condition. Ion velocity is sampled on the solver grid unless z is given.
    """
    if noise_percent < 0.0:
        raise ConfigurationError("Noise level must be nonnegative")
    if sweep_angles is None:
        sweep_angles = np.radians(np.arange(0.0, 91.0, 5.0))
    request = OutputRequest.only(*qois)
    if "j_ion" in qois:
        request = request.with_sweep(sweep_radius, sweep_angles)

    outputs = model.evaluate_many([(theta_true, c) for c in conditions], request)
    for condition, output in zip(conditions, outputs):
        if isinstance(output, HallcalError):
            raise output

    rng = np.random.default_rng(seed)
    scale = noise_percent / 100.0
    observations = []
    for condition, output in zip(conditions, outputs):
        for qoi in qois:
            coords = None
            radius = None
            if qoi == "u_ion":
                coords = output.z if z is None else np.asarray(z, dtype=float)
            elif qoi == "j_ion":
                coords = np.asarray(sweep_angles, dtype=float)
                radius = sweep_radius
            clean = output.values(qoi, coords, radius)
            noisy = clean * (1.0 + scale * rng.standard_normal(clean.shape))
            observations.append(
                Observation(
                    qoi=qoi,
                    condition=condition,
                    values=noisy if scale > 0.0 else clean,
                    coords=coords,
                    radius=radius,
                    noise_percent=noise_percent,
                )
            )
    logger.info(
        "Synthesized %d observations at %d conditions (%.3g%% noise)",
        len(observations),
        len(conditions),
        noise_percent,
    )
    return Dataset(
        name=name,
        thruster_id=thruster_id,
        category=category,
        observations=observations,
    )
