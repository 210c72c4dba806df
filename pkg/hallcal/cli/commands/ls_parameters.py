from pathlib import Path
from typing import Optional

import click

from ..groups import ls
from ..utils import complete_parameter_name, config_option, load_project, usage_errors
from ...params import PARAMETER_INFO, PriorCollection


@ls.command("parameters")
@config_option
@click.argument("names", nargs=-1, shell_complete=complete_parameter_name)
def ls_parameters(config: Optional[Path], names: tuple[str, ...]):
    """Model parameters with their priors (the project's, else the defaults)."""
    try:
        project = load_project(config)
    except click.UsageError:
        priors = PriorCollection()
    else:
        with usage_errors():
            priors = project.priors

    unknown = set(names) - set(PARAMETER_INFO)
    if unknown:
        raise click.UsageError(f"Unknown parameters {', '.join(sorted(unknown))}")

    rows = [
        (name, info.component, info.unit, priors[name].describe(), info.description)
        for name, info in PARAMETER_INFO.items()
        if not names or name in names
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    for row in rows:
        click.echo(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)) + "  " + row[4]
        )
