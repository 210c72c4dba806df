"""
Run artifacts: chain files, prediction exports, metric tables and run manifests.

A chain file starts with one ``# {json}`` line of run metadata, then a line of
column names (the parameters, then log_posterior, accepted and stage) and one
row per sample. Rows are only ever appended, so a chain that stops early is
still readable up to its last completed adaptation window.
"""

from dataclasses import asdict, dataclass, field
from functools import cached_property
import json
import logging
from pathlib import Path
from typing import Any, Mapping, Optional, Self, Sequence

import numpy as np

from .errors import ChainFileError, ConfigurationError
from .inference import Chain, ChainDiagnostics, QUANTILE_COLUMNS
from .system import SystemOutput
from .uq import PredictionEnsemble, QoiMetrics
from .utils import format_number


logger = logging.getLogger(__name__)

CHAIN_FORMAT = "hallcal-chain"
CHAIN_VERSION = 1
CHAIN_COLUMNS = ("log_posterior", "accepted", "stage")
MANIFEST_SUFFIX = ".manifest.json"


def _row(
    values: Sequence[float], log_posterior: float, accepted: bool, stage: int
) -> str:
    return " ".join(
        [f"{v:.17g}" for v in (*values, log_posterior)]
        + [str(int(accepted)), str(int(stage))]
    )


class ChainStore:
    """
    Append-only chain file. Single writer per file: create it, then call
    append with the growing chain after every adaptation window.
    """

    path: Path

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)

    def __repr__(self) -> str:
        return f"ChainStore({self.path})"

    @classmethod
    def create(
        cls,
        path: Path | str,
        names: Sequence[str],
        burn_in_fraction: float = 0.5,
        delayed_rejection: bool = True,
        metadata: Optional[Mapping[str, Any]] = None,
    ) -> Self:
        store = cls(path)
        store.path.parent.mkdir(parents=True, exist_ok=True)
        header = {
            "format": CHAIN_FORMAT,
            "version": CHAIN_VERSION,
            "names": list(names),
            "burn_in_fraction": burn_in_fraction,
            "delayed_rejection": delayed_rejection,
            "metadata": dict(metadata or {}),
        }
        columns = " ".join([*names, *CHAIN_COLUMNS])
        store.path.write_text(
            "# " + json.dumps(header, sort_keys=True) + "\n" + columns + "\n",
            encoding="utf-8",
        )
        store.rows_written = 0
        return store

    @cached_property
    def header(self) -> dict[str, Any]:
        if not self.path.is_file():
            raise FileNotFoundError(f"Chain file {self.path} does not exist")
        with self.path.open(encoding="utf-8") as f:
            first = f.readline()
        if not first.startswith("# "):
            raise ChainFileError(self.path, 1, "missing metadata header")
        try:
            header = json.loads(first[2:])
        except json.JSONDecodeError as e:
            raise ChainFileError(self.path, 1, f"invalid metadata header: {e}") from e
        if header.get("format") != CHAIN_FORMAT:
            raise ChainFileError(self.path, 1, "not a chain file")
        return header

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.header["names"])

    @property
    def metadata(self) -> dict[str, Any]:
        return self.header.get("metadata", {})

    @cached_property
    def rows_written(self) -> int:
        with self.path.open(encoding="utf-8") as f:
            return max(sum(1 for line in f if line.strip()) - 2, 0)

    def append(self, chain: Chain) -> int:
        """Write the rows of chain not yet in the file. Returns how many were added."""
        if tuple(chain.names) != self.names:
            raise ConfigurationError(
                f"Chain columns {chain.names} do not match the file {self.names}"
            )
        start = self.rows_written
        rows = [
            _row(
                chain.samples[i],
                chain.log_posterior[i],
                chain.accepted[i],
                chain.stage[i],
            )
            for i in range(start, len(chain))
        ]
        if rows:
            with self.path.open("a", encoding="utf-8") as f:
                f.write("\n".join(rows) + "\n")
        self.rows_written = len(chain)
        self.__dict__.pop("chain", None)
        logger.debug("Appended %d rows to %s", len(rows), self.path)
        return len(rows)

    @cached_property
    def chain(self) -> Chain:
        names = self.names
        width = len(names) + len(CHAIN_COLUMNS)
        rows = []
        with self.path.open(encoding="utf-8") as f:
            for number, line in enumerate(f, start=1):
                if number == 1 or not line.strip():
                    continue
                if number == 2:
                    if tuple(line.split()[: len(names)]) != names:
                        raise ChainFileError(
                            self.path, number, "column line does not match the header"
                        )
                    continue
                parts = line.split()
                if len(parts) != width:
                    raise ChainFileError(
                        self.path, number, f"expected {width} columns, got {len(parts)}"
                    )
                try:
                    rows.append([float(p) for p in parts])
                except ValueError as e:
                    raise ChainFileError(self.path, number, str(e)) from e
        data = np.array(rows, dtype=float).reshape(-1, width)
        return Chain(
            names=names,
            samples=data[:, : len(names)],
            log_posterior=data[:, len(names)],
            accepted=data[:, len(names) + 1].astype(bool),
            stage=data[:, len(names) + 2].astype(int),
            burn_in_fraction=self.header.get("burn_in_fraction", 0.5),
            delayed_rejection=self.header.get("delayed_rejection", True),
        )


def load_chain(path: Path | str) -> Chain:
    return ChainStore(path).chain


def save_chain(
    chain: Chain, path: Path | str, metadata: Optional[Mapping[str, Any]] = None
) -> ChainStore:
    store = ChainStore.create(
        path,
        chain.names,
        burn_in_fraction=chain.burn_in_fraction,
        delayed_rejection=chain.delayed_rejection,
        metadata=metadata,
    )
    store.append(chain)
    return store


# Predictions and tables


def _comment(key: str, value: Any) -> str:
    return f"# {key} = {json.dumps(value)}"


def prediction_filename(index: int, qoi: str) -> str:
    return f"{index:03d}_{qoi}.dat"


def save_predictions(
    ensemble: PredictionEnsemble, directory: Path | str
) -> list[Path]:
    """
    One columnar file per predicted target: the coordinate column for profile
    QoIs, then q5, q50 and q95, all in SI units.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for index, prediction in enumerate(ensemble.predictions):
        target = prediction.target
        c = target.condition
        lines = [
            _comment("mode", ensemble.mode),
            _comment("qoi", target.qoi),
            _comment(
                "condition",
                {
                    "V_d": c.discharge_voltage,
                    "P_B": c.background_pressure,
                    "m_a": c.anode_mass_flow,
                },
            ),
            _comment("samples", ensemble.n_samples),
            _comment("failures", ensemble.failures),
        ]
        if target.radius is not None:
            lines.append(_comment("radius", target.radius))
        columns = prediction.columns()
        lines.append("  ".join(columns))
        lines.extend(
            "  ".join(format_number(v) for v in row)
            for row in zip(*columns.values())
        )
        path = directory / prediction_filename(index, target.qoi)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    logger.info(
        "Wrote %d %s prediction files to %s", len(written), ensemble.mode, directory
    )
    return written


def save_metrics(
    rows: Mapping[str, Mapping[str, QoiMetrics]], path: Path | str
) -> Path:
    """Metrics as columns label, qoi, xi, mu50, mu, sigma, mu50_over_xi, n."""
    lines = ["label  qoi  xi  mu50  mu  sigma  mu50_over_xi  n"]
    for label, metrics in rows.items():
        for qoi, m in metrics.items():
            lines.append(
                "  ".join(
                    [
                        label,
                        qoi,
                        *(
                            format_number(v)
                            for v in (m.xi, m.mu50, m.mu, m.sigma, m.mu50_over_xi)
                        ),
                        str(m.n),
                    ]
                )
            )
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def save_diagnostics(diagnostics: ChainDiagnostics, path: Path | str) -> Path:
    """Per-parameter quantiles plus ESS, one row per parameter."""
    header = ["parameter", *(c.lower() for c in QUANTILE_COLUMNS), "ess"]
    lines = ["  ".join(header)]
    for name, q, ess in zip(diagnostics.names, diagnostics.quantiles, diagnostics.ess):
        values = [*q, ess]
        lines.append("  ".join([name, *(format_number(v) for v in values)]))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def save_system_output(
    output: SystemOutput, directory: Path | str, metadata: Mapping[str, Any]
) -> list[Path]:
    """Scalars as JSON, the plasma profile and every plume sweep as columns."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scalars = {
        "V_cc": output.V_cc,
        "thrust_uncorrected": output.thrust_uncorrected,
        "thrust_corrected": output.thrust_corrected,
        "I_D": output.I_D,
        "I_B": output.I_B,
        "divergence_angle": output.divergence_angle,
    }
    summary = directory / "output.json"
    summary.write_text(
        json.dumps(
            {
                "outputs": {k: v for k, v in scalars.items() if np.isfinite(v)},
                **metadata,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    written = [summary]
    if output.thruster is not None:
        written.append(
            _write_columns(directory / "profile.dat", output.thruster.profile_columns())
        )
    for r, (phi, j) in output.j_ion.items():
        written.append(
            _write_columns(
                directory / f"j_ion_r{format_number(r)}.dat",
                {"phi": phi, "j_ion": j},
                [_comment("radius", r)],
            )
        )
    return written


def _write_columns(
    path: Path, columns: Mapping[str, np.ndarray], header: Sequence[str] = ()
) -> Path:
    lines = [*header, "  ".join(columns)]
    lines.extend(
        "  ".join(format_number(v) for v in row) for row in zip(*columns.values())
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# Manifests


def manifest_filename(command: str) -> str:
    return f"{command}{MANIFEST_SUFFIX}"


@dataclass
class RunManifest:
    """What a command ran on and with, written next to its outputs."""

    command: str
    config: Optional[Path]
    datasets: list[Path] = field(default_factory=list)
    out: Optional[Path] = None
    seed: Optional[int] = None
    options: dict[str, Any] = field(default_factory=dict)
    fingerprints: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.config = Path(self.config) if self.config is not None else None
        self.datasets = [Path(p) for p in self.datasets]
        self.out = Path(self.out) if self.out is not None else None

    def validate(self) -> None:
        """Referenced files must exist and the output directory must be writable."""
        for path in [self.config, *self.datasets]:
            if path is not None and not path.exists():
                raise FileNotFoundError(f"{path} does not exist")
        if self.out is not None:
            try:
                self.out.mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise ConfigurationError(
                    f"Cannot create output directory {self.out}: {e}"
                ) from e
            if not self.out.is_dir():
                raise ConfigurationError(f"{self.out} is not a directory")

    def as_json(self) -> dict[str, Any]:
        data = asdict(self)
        data["config"] = str(self.config) if self.config else None
        data["datasets"] = [str(p) for p in self.datasets]
        data["out"] = str(self.out) if self.out else None
        return data

    def write(self, directory: Optional[Path] = None) -> Path:
        directory = Path(directory or self.out or ".")
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / manifest_filename(self.command)
        path.write_text(
            json.dumps(self.as_json(), indent=2, sort_keys=True, default=str) + "\n",
            encoding="utf-8",
        )
        return path

    @classmethod
    def read(cls, path: Path | str, command: Optional[str] = None) -> Self:
        path = Path(path)
        if path.is_dir():
            if command is None:
                raise ValueError("Reading a manifest from a directory needs the command")
            path = path / manifest_filename(command)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(**data)
