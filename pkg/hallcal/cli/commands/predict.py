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
from ...artifacts import RunManifest, load_chain, save_predictions
from ...uq import (
    MODES,
    PROFILE_PRESSURES,
    compare_to_data,
    default_targets,
    format_comparison_table,
    posterior_predict,
    profile_targets,
    targets_from_datasets,
)
from .calibrate import CHAIN_FILE


@cli.command("predict")
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
@click.option("--seed", type=int, default=None)
@click.option("--samples", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option(
    "--mode",
    type=click.Choice([*MODES, "both"]),
    default="both",
    show_default=True,
)
@click.option(
    "--nu-anom",
    "anomalous_profiles",
    is_flag=True,
    help="Also predict the anomalous collision frequency profile, nu_anom/nu_bohm.",
)
@click.option(
    "--profile-pressure",
    "profile_pressures",
    type=click.FloatRange(min=0.0, min_open=True),
    multiple=True,
    help="Background pressure in uTorr for --nu-anom; repeatable. "
    f"Defaults to {', '.join(f'{p:g}' for p in PROFILE_PRESSURES)}.",
)
@workers_option
@plots_option
def predict(
    config: Optional[Path],
    datasets: tuple[Path, ...],
    out: Path,
    chain_file: Optional[Path],
    seed: Optional[int],
    samples: int,
    mode: str,
    anomalous_profiles: bool,
    profile_pressures: tuple[float, ...],
    workers: int,
    emit_plots: bool,
):
    """Posterior-predictive quantiles at the test conditions."""
    project = load_project(config)
    test = select_datasets(project, datasets, "test")
    chain_file = chain_file or out / CHAIN_FILE

    with usage_errors():
        chain = load_chain(chain_file)
        model = project.system_model
        sigmas = project.aleatoric
        if test:
            targets = targets_from_datasets(test)
        else:
            targets = default_targets([project.operating_condition])
        pressures = (profile_pressures or PROFILE_PRESSURES) if anomalous_profiles else ()
        if pressures:
            targets += profile_targets(project.operating_condition, pressures)
        manifest = RunManifest(
            command="predict",
            config=project.config_file,
            datasets=dataset_paths(project, datasets, "test") if test else [],
            out=out,
            seed=seed,
            options={
                "chain": str(chain_file),
                "samples": samples,
                "mode": mode,
                "nu_anom_pressures": list(pressures),
            },
            fingerprints={"model": model.fingerprint},
        )
        manifest.validate()

    modes = MODES if mode == "both" else (mode,)
    model.open_pool(workers)
    try:
        with runtime_errors():
            for m in modes:
                click.echo(f"Propagating {samples} posterior samples ({m})")
                ensemble = posterior_predict(
                    model, chain, targets, m, N=samples, seed=seed, sigmas=sigmas
                )
                written = save_predictions(ensemble, out / "predictions" / m)
                click.echo(f"Wrote {len(written)} files to {out / 'predictions' / m}")
                if ensemble.failures:
                    click.echo(
                        f"{ensemble.failures} of {ensemble.evaluations} evaluations "
                        f"failed and were excluded",
                        err=True,
                    )
                if test:
                    table = format_comparison_table(compare_to_data(ensemble, test))
                    (out / f"comparison_{m}.txt").write_text(table, encoding="utf-8")
                    click.echo(table, nl=False)
                if emit_plots:
                    from ...plots import plot_predictions

                    plot_predictions(ensemble, out / "plots")
    finally:
        model.close_pool()
    manifest.write(out)
