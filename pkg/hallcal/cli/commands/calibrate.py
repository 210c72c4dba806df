from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional

import click

from ..groups import root as cli
from ..utils import (
    config_option,
    dataset_paths,
    datasets_option,
    load_project,
    out_option,
    plots_option,
    runtime_errors,
    select_datasets,
    usage_errors,
    workers_option,
)
from ...artifacts import ChainStore, RunManifest, save_diagnostics
from ...errors import HallcalError
from ...inference import Chain, calibrate as run_calibration
from ...inference import chain_diagnostics, format_summary_table
from ...params import PARAMETER_NAMES

CHAIN_FILE = "chain.dat"


@cli.command("calibrate")
@config_option
@datasets_option
@out_option
@click.option("--seed", type=int, default=None)
@click.option("--samples", type=click.IntRange(min=1), default=None)
@workers_option
@click.option(
    "--cheap",
    is_flag=True,
    default=False,
    help="Coarser grid and shorter run for the discharge solver.",
)
@plots_option
def calibrate(
    config: Optional[Path],
    datasets: tuple[Path, ...],
    out: Path,
    seed: Optional[int],
    samples: Optional[int],
    workers: int,
    cheap: bool,
    emit_plots: bool,
):
    """Sample the parameter posterior given the training datasets."""
    project = load_project(config)
    training = select_datasets(project, datasets, "training")
    if not training:
        raise click.UsageError("No training datasets given or configured")

    with usage_errors():
        cfg = project.sampler
        cfg = replace(
            cfg,
            n_samples=samples if samples is not None else cfg.n_samples,
            seed=seed if seed is not None else cfg.seed,
        )
        model = project.system_model
        if cheap:
            model = model.with_settings(model.settings.cheapened())
        priors = project.priors
        likelihood = project.likelihood
        manifest = RunManifest(
            command="calibrate",
            config=project.config_file,
            datasets=dataset_paths(project, datasets, "training"),
            out=out,
            seed=cfg.seed,
            options={"samples": cfg.n_samples, "workers": workers, "cheap": cheap},
            fingerprints={
                "model": model.fingerprint,
                **{str(d.id): d.fingerprint for d in training},
            },
        )
        manifest.validate()

    store = ChainStore.create(
        out / CHAIN_FILE,
        PARAMETER_NAMES,
        burn_in_fraction=cfg.burn_in_fraction,
        delayed_rejection=cfg.delayed_rejection,
        metadata={
            "seed": cfg.seed,
            "priors": {name: priors[name].describe() for name in priors.names},
            "datasets": manifest.fingerprints,
            "sampler": asdict(cfg),
            "likelihood": {
                "default": likelihood.default_target,
                **likelihood.targets,
            },
        },
    )

    def persist(chain: Chain, start: int, stop: int) -> None:
        store.append(chain)

    click.echo(
        f"Calibrating against {', '.join(str(d.id) for d in training)} "
        f"with {cfg.n_samples} samples"
    )
    model.open_pool(workers)
    try:
        with runtime_errors():
            try:
                chain = run_calibration(
                    model, training, priors, likelihood, cfg, on_window=persist
                )
            except (HallcalError, KeyboardInterrupt):
                if store.rows_written:
                    click.echo(
                        f"Calibration stopped; {store.rows_written} samples kept in "
                        f"{store.path}",
                        err=True,
                    )
                raise
    finally:
        model.close_pool()
    store.append(chain)

    diagnostics = chain_diagnostics(chain)
    table = format_summary_table(diagnostics)
    (out / "summary.txt").write_text(table, encoding="utf-8")
    save_diagnostics(diagnostics, out / "diagnostics.dat")
    manifest.options["stalls"] = chain.stalls
    manifest.options["failures"] = chain.failures
    manifest.write(out)
    click.echo(table, nl=False)

    if emit_plots:
        from ...plots import plot_marginals, plot_trace

        with usage_errors():
            plot_marginals(chain, out / "marginals.png")
            plot_trace(chain, out / "trace.png")

    kept = chain.accepted[chain.burn_in :]
    if chain.stalls and not kept[1:].any():
        raise click.ClickException(
            f"The sampler stalled: no move was accepted after burn-in. "
            f"The chain is in {store.path}"
        )
    if chain.stalls:
        click.echo(
            f"Warning: {chain.stalls} adaptation window(s) without an accepted move",
            err=True,
        )
