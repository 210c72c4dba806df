from contextlib import contextmanager
import os
from pathlib import Path
from typing import Iterator, Optional, Sequence

import click

from ..datasets import Dataset, load_datasets
from ..errors import ConfigurationError, DatasetParseError, HallcalError
from ..params import PARAMETER_NAMES
from ..project import Project
from ..utils import DatasetId


def complete_dataset_id(ctx, param, incomplete):
    try:
        project = Project.from_closest_parent()
        datasets = [*project.training_datasets, *project.test_datasets]
    except (FileNotFoundError, NotADirectoryError, HallcalError):
        return []
    else:
        return [
            str(d.id)
            for d in datasets
            if d.name.startswith(incomplete) or str(d.id).startswith(incomplete)
        ]


def complete_parameter_name(ctx, param, incomplete):
    return [name for name in PARAMETER_NAMES if name.startswith(incomplete)]


config_option = click.option(
    "--config",
    type=click.Path(exists=False, path_type=Path),
    default=None,
    help="hallcal.toml to use instead of the closest one above the working directory.",
)
out_option = click.option(
    "--out",
    type=click.Path(file_okay=False, dir_okay=True, writable=True, path_type=Path),
    required=True,
)
workers_option = click.option(
    "--workers",
    type=click.IntRange(min=1),
    default=lambda: os.cpu_count() or 1,
    show_default="number of cores",
)
datasets_option = click.option(
    "--datasets",
    "-d",
    type=click.Path(exists=False, path_type=Path),
    multiple=True,
    help="Dataset files or directories; replaces the ones named in the config.",
)
plots_option = click.option("--emit-plots", is_flag=True, default=False)
only_option = click.option(
    "--only",
    multiple=True,
    shell_complete=complete_dataset_id,
    help="Restrict to these datasets, given as THRUSTER::NAME or NAME.",
)


def load_project(config: Optional[Path]) -> Project:
    try:
        return Project.from_option(config)
    except (FileNotFoundError, NotADirectoryError, ConfigurationError) as e:
        raise click.UsageError(str(e)) from e


@contextmanager
def usage_errors() -> Iterator[None]:
    """Translate configuration and input problems into exit code 2."""
    try:
        yield
    except (
        ConfigurationError,
        DatasetParseError,
        FileNotFoundError,
        NotADirectoryError,
        KeyError,
    ) as e:
        message = e.args[0] if isinstance(e, KeyError) and e.args else str(e)
        raise click.UsageError(str(message)) from e


@contextmanager
def runtime_errors() -> Iterator[None]:
    """Translate failures while running the model into exit code 1."""
    try:
        yield
    except (ConfigurationError, DatasetParseError) as e:
        raise click.UsageError(str(e)) from e
    except HallcalError as e:
        raise click.ClickException(str(e)) from e


def select_datasets(
    project: Optional[Project], paths: Sequence[Path], split: str
) -> list[Dataset]:
    """Datasets given on the command line, else the project's split."""
    with usage_errors():
        if not paths:
            return project.datasets(split)
        for path in paths:
            if not path.exists():
                raise FileNotFoundError(f"Dataset path {path} does not exist")
        return load_datasets(paths)


def dataset_paths(project: Project, paths: Sequence[Path], split: str) -> list[Path]:
    return list(paths) if paths else project.dataset_paths(split)


def parse_dataset_id(value: str, prefix: Optional[str]) -> DatasetId:
    """THRUSTER::NAME, or NAME for a dataset of the prefix thruster."""
    try:
        dataset_id = DatasetId.from_string(value, prefix=prefix)
    except ValueError as e:
        raise click.UsageError(str(e)) from e
    if not all(dataset_id):
        raise click.UsageError(f"Invalid dataset id: {value}")
    return dataset_id


def only_datasets(
    found: Sequence[Dataset], only: Sequence[str], prefix: Optional[str]
) -> list[Dataset]:
    if not only:
        return list(found)
    by_id = {d.id: d for d in found}
    chosen = []
    for value in only:
        dataset_id = parse_dataset_id(value, prefix)
        if dataset_id not in by_id:
            raise click.UsageError(f"Unknown dataset {dataset_id}")
        chosen.append(by_id[dataset_id])
    return chosen
