from pathlib import Path
from typing import Optional

import click

from ..groups import ls
from ..utils import (
    config_option,
    datasets_option,
    load_project,
    only_datasets,
    only_option,
    select_datasets,
)


@ls.command("datasets")
@config_option
@datasets_option
@click.option(
    "--split",
    type=click.Choice(["training", "test", "all"]),
    default="all",
    show_default=True,
)
@only_option
def ls_datasets(
    config: Optional[Path],
    datasets: tuple[Path, ...],
    split: str,
    only: tuple[str, ...],
):
    """Datasets with their QoIs as qoi(n_q x m_q)."""
    if datasets:
        found = select_datasets(None, datasets, split)
        prefix = None
    else:
        project = load_project(config)
        splits = ("training", "test") if split == "all" else (split,)
        found = [d for s in splits for d in select_datasets(project, (), s)]
        prefix = project.thruster_id

    for d in only_datasets(found, only, prefix):
        counts = " ".join(f"{q}({n}x{m})" for q, (n, m) in d.counts.items())
        click.echo(f"{d.id} [{d.category}] {counts}")
