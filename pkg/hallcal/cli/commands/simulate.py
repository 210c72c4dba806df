from pathlib import Path
from typing import Optional

import click
import numpy as np

from ..groups import root as cli
from ..utils import config_option, load_project, out_option, runtime_errors, usage_errors
from ...artifacts import RunManifest, save_system_output
from ...system import OutputRequest


@cli.command("simulate")
@config_option
@out_option
@click.option(
    "--sweep-radius",
    type=click.FloatRange(min=0.0, min_open=True),
    multiple=True,
    default=[1.0],
    show_default=True,
    help="Radius (m) of a plume current density sweep over 0-90 deg.",
)
@click.option("--seed", type=int, default=None, help="Recorded in the manifest only.")
def simulate(
    config: Optional[Path], out: Path, sweep_radius: list[float], seed: Optional[int]
):
    """One forward evaluation at the configured condition and parameters."""
    project = load_project(config)
    with usage_errors():
        model = project.system_model
        condition = project.operating_condition
        theta = project.nominal_parameters
        manifest = RunManifest(
            command="simulate",
            config=project.config_file,
            out=out,
            seed=seed,
            options={"sweep_radius": list(sweep_radius)},
            fingerprints={"model": model.fingerprint},
        )
        manifest.validate()

    angles = np.radians(np.arange(0.0, 90.5, 1.0))
    request = OutputRequest()
    for r in sweep_radius:
        request = request.with_sweep(r, angles)

    click.echo(f"Simulating {condition}")
    with runtime_errors():
        output = model.evaluate(theta, condition, request)
    written = save_system_output(
        output,
        out,
        {
            "condition": {
                "V_d": condition.discharge_voltage,
                "P_B": condition.background_pressure,
                "m_a": condition.anode_mass_flow,
            },
            "parameters": theta.as_dict(),
        },
    )
    written.append(manifest.write(out))

    click.echo(f"V_cc = {output.V_cc:.4g} V")
    click.echo(f"I_D  = {output.I_D:.4g} A")
    click.echo(
        f"T    = {1e3 * output.thrust_uncorrected:.4g} mN uncorrected, "
        f"{1e3 * output.thrust_corrected:.4g} mN corrected "
        f"(divergence {np.degrees(output.divergence_angle):.3g} deg)"
    )
    for path in written:
        click.echo(f"Wrote {path}")
