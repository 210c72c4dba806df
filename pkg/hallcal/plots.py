"""
Static plots for --emit-plots. Requires the optional matplotlib dependency.
"""

from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .inference import Chain
from .uq import PredictionEnsemble


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:
        raise ConfigurationError(
            "Plots need matplotlib; install hallcal with the 'plots' extra"
        ) from e
    return plt


def plot_marginals(
    chain: Chain, path: Path, log_names: Sequence[str] = ("c4", "c5")
) -> Path:
    """Histogram of every post-burn-in marginal, log10 for log_names."""
    plt = _pyplot()
    kept = chain.post_burn_in
    d = len(chain.names)
    columns = min(d, 6)
    rows = int(np.ceil(d / columns))
    fig = plt.figure(figsize=(2.5 * columns, 2.2 * rows))
    for i, name in enumerate(chain.names):
        ax = fig.add_subplot(rows, columns, i + 1)
        values = kept[:, i]
        if name in log_names:
            values = np.log10(values)
            name = f"log10 {name}"
        ax.hist(values, bins=40, density=True, color="C0", alpha=0.8)
        ax.axvline(np.median(values), color="red", ls="dashed", lw=1.5)
        ax.set_xlabel(name, fontsize=10)
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path)
    fig.clear()
    plt.close(fig)
    return path


def plot_trace(chain: Chain, path: Path) -> Path:
    plt = _pyplot()
    fig = plt.figure(figsize=(10, 4))
    ax = fig.add_subplot(111)
    ax.plot(chain.log_posterior, marker=".", ls="none", markersize=2)
    ax.axvline(chain.burn_in, color="red", ls="dashed", lw=2)
    ax.set_xlabel("chain step", fontsize=12)
    ax.set_ylabel("log posterior", fontsize=12)
    ax.grid()
    fig.tight_layout()
    fig.savefig(path)
    fig.clear()
    plt.close(fig)
    return path


def plot_predictions(ensemble: PredictionEnsemble, directory: Path) -> list[Path]:
    """One band plot per profile prediction, one errorbar plot per scalar QoI."""
    plt = _pyplot()
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    for index, p in enumerate(ensemble.predictions):
        if p.coords is None:
            continue
        fig = plt.figure(figsize=(6, 4))
        ax = fig.add_subplot(111)
        x = np.degrees(p.coords) if p.target.qoi == "j_ion" else p.coords
        ax.fill_between(x, p.q5, p.q95, color="C0", alpha=0.3, label="5-95%")
        ax.plot(x, p.q50, color="C0", label="median")
        source = p.target.source
        if source is not None:
            ax.plot(x, source.values, "k.", label="data")
        if p.target.qoi in ("j_ion", "nu_anom"):
            ax.set_yscale("log")
        ax.set_xlabel("angle (deg)" if p.target.qoi == "j_ion" else "z (m)")
        ax.set_ylabel(p.target.qoi)
        ax.set_title(str(p.target.condition), fontsize=9)
        ax.legend()
        fig.tight_layout()
        path = directory / f"{index:03d}_{p.target.qoi}_{ensemble.mode}.png"
        fig.savefig(path)
        fig.clear()
        plt.close(fig)
        written.append(path)

    scalars = sorted({p.target.qoi for p in ensemble.predictions if p.coords is None})
    for qoi in scalars:
        predictions = ensemble.select(qoi)
        pressures = np.array(
            [p.target.condition.background_pressure_torr * 1e6 for p in predictions]
        )
        q50 = np.array([p.q50[0] for p in predictions])
        errors = np.array(
            [[m - p.q5[0], p.q95[0] - m] for m, p in zip(q50, predictions)]
        )
        fig = plt.figure(figsize=(6, 4))
        ax = fig.add_subplot(111)
        ax.errorbar(pressures, q50, yerr=errors.T, fmt="o", capsize=3, label="model")
        data = [
            (x, p.target.source.values[0])
            for x, p in zip(pressures, predictions)
            if p.target.source is not None
        ]
        if data:
            ax.plot(*zip(*data), "kx", label="data")
        ax.set_xlabel("background pressure (uTorr)")
        ax.set_ylabel(qoi)
        ax.legend()
        ax.grid()
        fig.tight_layout()
        path = directory / f"{qoi}_{ensemble.mode}.png"
        fig.savefig(path)
        fig.clear()
        plt.close(fig)
        written.append(path)
    return written
