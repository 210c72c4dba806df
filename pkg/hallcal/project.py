from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Optional, Self
import tomllib

from .datasets import Dataset, load_datasets
from .errors import ConfigurationError
from .inference import DramConfig, LikelihoodConfig
from .params import (
    PARAMETER_NAMES,
    AleatoricSpec,
    OperatingCondition,
    ParameterSet,
    PriorCollection,
    parameters_from_config,
)
from .system import QOI_KINDS, SystemModel
from .utils import DatasetId


CONFIG_NAME = "hallcal.toml"


class Project:
    """A directory holding hallcal.toml, and the objects its sections describe."""

    root_folder: Path
    config_file: Path
    config: dict[str, Any]

    @classmethod
    def from_closest_parent(cls, directory: Optional[Path] = None) -> Self:
        directory = directory or Path.cwd()
        if not directory.is_dir():
            raise NotADirectoryError(f"{directory} is not a directory")

        for candidate in [directory, *directory.parents]:
            if (config_file := candidate / CONFIG_NAME).is_file():
                with config_file.open(mode="rb") as f:
                    config = tomllib.load(f)
                if "project" in config:
                    return cls(config_file)
        raise FileNotFoundError(
            f"Found no {CONFIG_NAME} with a project section in {directory} or its parents."
        )

    @classmethod
    def from_option(cls, config: Optional[Path]) -> Self:
        """The project named by --config, or the closest one above the working directory."""
        if config is None:
            return cls.from_closest_parent()
        return cls(config / CONFIG_NAME if config.is_dir() else config)

    def __init__(self, config_file: Path) -> None:
        if not config_file.is_file():
            raise FileNotFoundError(f"No config file {config_file}")
        try:
            with config_file.open(mode="rb") as f:
                config = tomllib.load(f)
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"{config_file}: {e}") from e
        try:
            project = config["project"]
        except KeyError:
            raise ConfigurationError(f"Missing project section in {config_file}")
        try:
            self.name = project["name"]
        except KeyError:
            raise ConfigurationError(f"Missing name in project section of {config_file}")

        self.thruster_id: Optional[str] = project.get("thruster")
        self.config_file = config_file.resolve()
        self.root_folder = self.config_file.parent
        self.config = config

    def __repr__(self) -> str:
        return f"Project(name={self.name}, root_folder={self.root_folder})"

    def section(self, name: str) -> Mapping[str, Any]:
        value = self.config.get(name, {})
        if not isinstance(value, Mapping):
            raise ConfigurationError(f"[{name}] must be a table in {self.config_file}")
        return value

    @cached_property
    def system_model(self) -> SystemModel:
        return SystemModel.from_config(self.config, root_folder=self.root_folder)

    @cached_property
    def priors(self) -> PriorCollection:
        return PriorCollection.from_config(self.section("parameters"))

    @cached_property
    def likelihood(self) -> LikelihoodConfig:
        return LikelihoodConfig.from_config(self.section("likelihood"))

    @cached_property
    def sampler(self) -> DramConfig:
        return DramConfig.from_config(self.section("sampler"))

    @cached_property
    def aleatoric(self) -> AleatoricSpec:
        return AleatoricSpec.from_config(self.section("aleatoric"))

    @cached_property
    def xi(self) -> dict[str, float]:
        """Nominal experimental error per QoI."""
        metrics = self.section("metrics")
        unknown = set(metrics) - set(QOI_KINDS)
        if unknown:
            raise ConfigurationError(f"Unknown QoIs in [metrics]: {sorted(unknown)}")
        return {qoi: float(v) for qoi, v in metrics.items()}

    @cached_property
    def operating_condition(self) -> OperatingCondition:
        if "operating" not in self.config:
            raise ConfigurationError(f"Missing operating section in {self.config_file}")
        return OperatingCondition.from_config(self.section("operating"))

    @cached_property
    def nominal_parameters(self) -> ParameterSet:
        """[simulate.parameters] where given, the prior midpoint elsewhere."""
        given = dict(self.section("simulate").get("parameters", {}))
        unknown = set(given) - set(PARAMETER_NAMES)
        if unknown:
            raise ConfigurationError(f"Unknown parameters {sorted(unknown)}")
        midpoint = dict(zip(self.priors.names, self.priors.midpoint()))
        return parameters_from_config(
            {name: given.get(name, midpoint[name]) for name in PARAMETER_NAMES}
        )

    def _paths(self, split: str) -> list[Path]:
        entries = self.section("datasets").get(split, [])
        if isinstance(entries, str):
            entries = [entries]
        paths = []
        for entry in entries:
            path = self.root_folder / entry
            if not path.exists():
                raise FileNotFoundError(f"Dataset path {path} does not exist")
            paths.append(path)
        return paths

    def dataset_paths(self, split: str) -> list[Path]:
        if split not in ("training", "test"):
            raise ConfigurationError(f"Unknown dataset split {split!r}")
        return self._paths(split)

    @cached_property
    def training_datasets(self) -> list[Dataset]:
        return self._checked(load_datasets(self.dataset_paths("training")), "training")

    @cached_property
    def test_datasets(self) -> list[Dataset]:
        return self._checked(load_datasets(self.dataset_paths("test")), "test")

    def datasets(self, split: str) -> list[Dataset]:
        return self.training_datasets if split == "training" else self.test_datasets

    def _checked(self, datasets: list[Dataset], split: str) -> list[Dataset]:
        for d in datasets:
            if d.category != split:
                raise ConfigurationError(
                    f"{d.id} is a {d.category} dataset but is listed under {split}"
                )
            if self.thruster_id and d.thruster_id != self.thruster_id:
                raise ConfigurationError(
                    f"{d.id} belongs to thruster {d.thruster_id}, "
                    f"the project to {self.thruster_id}"
                )
        return datasets

    def by_id(self, dataset_id: DatasetId) -> Dataset:
        for d in [*self.training_datasets, *self.test_datasets]:
            if d.id == dataset_id:
                return d
        raise KeyError(f"Unknown dataset {dataset_id}")


PROJECT_TEMPLATE = """\
[project]
name = "{name}"
thruster = "{thruster}"

# Channel geometry in meters. wall_shielded switches the wall-loss branch off.
[thruster]
propellant = "xenon"
channel_length = 0.025
inner_radius = 0.0345
outer_radius = 0.05
wall_shielded = false

[thruster.magnetic_field]
B_max = 0.015
z_peak = 0.025
width_upstream = 0.0156
width_downstream = 0.0255

[thruster.numerics]
cells = 100
duration = 1e-3
averaging_window = 5e-4

[plume]
cex_cross_section = 5.5e-19
divergence_radius = 1.0

# Nominal condition for `hallcal simulate`.
[operating]
discharge_voltage = 300
background_pressure = {{ value = 5, unit = "uTorr" }}
anode_mass_flow = {{ value = 5, unit = "mg/s" }}

[aleatoric]
discharge_voltage = 0.02
background_pressure = 0.05
anode_mass_flow = 0.02

# Priors override the built-in defaults parameter by parameter, e.g.
# [parameters.V_vac]
# prior = "uniform"
# low = 0
# high = 60

[likelihood]
default = 0.025

[likelihood.targets]
V_cc = 0.01
T_c = 0.01

[metrics]
V_cc = 0.01
T_c = 0.02
I_D = 0.02
u_ion = 0.1
j_ion = 0.2

[sampler]
samples = 50000
burn_in_fraction = 0.5

[datasets]
training = ["datasets/training"]
test = ["datasets/test"]
"""


def write_project(
    directory: Path, name: str, thruster: str = "SPT-100", overwrite: bool = False
) -> Path:
    """Write a hallcal.toml template into directory."""
    directory.mkdir(parents=True, exist_ok=True)
    config_file = directory / CONFIG_NAME
    if config_file.exists() and not overwrite:
        raise FileExistsError(f"{config_file} already exists")
    config_file.write_text(
        PROJECT_TEMPLATE.format(name=name, thruster=thruster), encoding="utf-8"
    )
    for split in ("training", "test"):
        (directory / "datasets" / split).mkdir(parents=True, exist_ok=True)
    return config_file
