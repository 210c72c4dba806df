from dataclasses import replace
from pathlib import Path
from typing import Optional

import click

from ..groups import add
from ..utils import (
    config_option,
    load_project,
    parse_dataset_id,
    runtime_errors,
    usage_errors,
)
from ...datasets import CATEGORIES, save_dataset, synthesize_dataset
from ...system import QOI_KINDS
from ...utils import to_si


@add.command("dataset")
@click.argument(
    "path",
    type=click.Path(
        exists=False,
        writable=True,
        file_okay=False,
        dir_okay=True,
        resolve_path=True,
        path_type=Path,
    ),
)
@config_option
@click.option(
    "--name",
    type=str,
    default=None,
    help="Dataset id as THRUSTER::NAME or NAME; defaults to the directory name.",
)
@click.option(
    "--category", type=click.Choice(CATEGORIES), default="training", show_default=True
)
@click.option(
    "--pressure",
    "pressures",
    type=click.FloatRange(min=0.0, min_open=True),
    multiple=True,
    help="Background pressure in uTorr; one condition each. Defaults to [operating].",
)
@click.option("--qoi", "qois", type=click.Choice(QOI_KINDS), multiple=True)
@click.option("--noise", type=click.FloatRange(min=0.0), default=2.0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--cheap", is_flag=True, default=False)
def add_dataset(
    path: Path,
    config: Optional[Path],
    name: Optional[str],
    category: str,
    pressures: tuple[float, ...],
    qois: tuple[str, ...],
    noise: float,
    seed: Optional[int],
    cheap: bool,
):
    """
    Synthesize a dataset from the configured parameters at the operating
    condition, with relative Gaussian noise, and write it into PATH.
    """
    project = load_project(config)
    with usage_errors():
        model = project.system_model
        if cheap:
            model = model.with_settings(model.settings.cheapened())
        nominal = project.operating_condition
        conditions = [
            replace(nominal, background_pressure=to_si(p, "uTorr")) for p in pressures
        ] or [nominal]
        theta = project.nominal_parameters
    dataset_id = parse_dataset_id(
        name or path.name, project.thruster_id or "synthetic"
    )

    click.echo(f"Synthesizing {len(conditions)} condition(s) with {noise:g}% noise")
    with runtime_errors():
        dataset = synthesize_dataset(
            model,
            theta,
            conditions,
            noise,
            seed,
            qois=qois or QOI_KINDS,
            name=dataset_id.dataset,
            thruster_id=dataset_id.thruster_id,
            category=category,
        )
    for written in save_dataset(dataset, path):
        click.echo(f"Wrote {written}")
