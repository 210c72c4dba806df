from pathlib import Path
from typing import Optional

import click

from ..groups import add
from ...project import write_project


@add.command("project")
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
@click.option("--name", type=str, default=None)
@click.option("--thruster", type=str, default="SPT-100", show_default=True)
def add_project(path: Path, name: Optional[str], thruster: str):
    """Write a documented hallcal.toml template into PATH."""
    if path.exists() and any(path.iterdir()):
        raise click.UsageError(
            f"Cannot create project, because {path} exists and is not empty."
        )
    config_file = write_project(path, name or path.name, thruster)
    click.echo(f"Created {config_file}")
