from pathlib import Path
from typing import Optional

import click

from ..groups import root as cli
from ..utils import (
    config_option,
    dataset_paths,
    datasets_option,
    load_project,
    only_datasets,
    only_option,
    out_option,
    runtime_errors,
    select_datasets,
    usage_errors,
    workers_option,
)
from ...artifacts import RunManifest, load_chain, save_metrics
from ...system import QOI_KINDS
from ...uq import (
    MODES,
    error_metrics,
    format_metrics_table,
    point_predict,
    posterior_predict,
    prior_predict,
    targets_from_datasets,
)
from .calibrate import CHAIN_FILE


@cli.command("validate")
@config_option
@datasets_option
@out_option
@click.option(
    "--chain",
    "chain_file",
    type=click.Path(path_type=Path),
    default=None,
    help=f"Chain file; defaults to OUT/{CHAIN_FILE}.",
)
@click.option(
    "--split", type=click.Choice(["test", "training"]), default="test", show_default=True
)
@click.option("--seed", type=int, default=None)
@click.option("--samples", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--mode", type=click.Choice(MODES), default="total", show_default=True)
@click.option("--prior/--no-prior", default=True, help="Also report the prior row.")
@only_option
@workers_option
def validate(
    config: Optional[Path],
    datasets: tuple[Path, ...],
    out: Path,
    chain_file: Optional[Path],
    split: str,
    seed: Optional[int],
    samples: int,
    mode: str,
    prior: bool,
    only: tuple[str, ...],
    workers: int,
):
    """Relative L2 errors of prior and posterior predictions against data."""
    project = load_project(config)
    observed = only_datasets(
        select_datasets(project, datasets, split), only, project.thruster_id
    )
    if not observed:
        raise click.UsageError(f"No {split} datasets given or configured")
    chain_file = chain_file or out / CHAIN_FILE

    with usage_errors():
        chain = load_chain(chain_file)
        model = project.system_model
        priors = project.priors
        sigmas = project.aleatoric
        xi = project.xi
        manifest = RunManifest(
            command="validate",
            config=project.config_file,
            datasets=dataset_paths(project, datasets, split),
            out=out,
            seed=seed,
            options={
                "chain": str(chain_file),
                "split": split,
                "samples": samples,
                "mode": mode,
            },
            fingerprints={
                "model": model.fingerprint,
                **{str(d.id): d.fingerprint for d in observed},
            },
        )
        manifest.validate()

    present = {q for d in observed for q in d.qois}
    for qoi in QOI_KINDS:
        if qoi not in present:
            click.echo(f"Skipping {qoi}: not in the {split} datasets", err=True)

    targets = targets_from_datasets(observed)
    rows = {}
    model.open_pool(workers)
    try:
        with runtime_errors():
            if prior:
                click.echo(f"Propagating {samples} prior samples ({mode})")
                ensemble = prior_predict(
                    model, priors, targets, mode, N=samples, seed=seed, sigmas=sigmas
                )
                median = point_predict(model, priors.names, priors.midpoint(), targets)
                rows["Prior"] = error_metrics(ensemble, median, observed, xi)

            click.echo(f"Propagating {samples} posterior samples ({mode})")
            ensemble = posterior_predict(
                model, chain, targets, mode, N=samples, seed=seed, sigmas=sigmas
            )
            median = point_predict(model, chain.names, chain.medians(), targets)
            rows["Posterior"] = error_metrics(ensemble, median, observed, xi)
    finally:
        model.close_pool()

    table = format_metrics_table(rows)
    (out / f"metrics_{split}.txt").write_text(table, encoding="utf-8")
    save_metrics(rows, out / f"metrics_{split}.dat")
    manifest.write(out)
    click.echo(table, nl=False)
