"""
Posterior-predictive propagation and the relative L2 error metrics.

Epistemic predictions draw parameter samples from the post-burn-in chain and
keep the operating conditions at their nominal values. Total predictions
additionally perturb every condition with the aleatoric sigmas; the two draws
come from independent RNG streams, so with zero sigmas both modes agree.
"""

from dataclasses import dataclass, field, replace
import logging
from typing import Any, Iterable, Literal, Mapping, Optional, Sequence

import numpy as np

from .datasets import Dataset, Observation
from .errors import (
    ConfigurationError,
    HallcalError,
    PredictionFailureError,
    UndefinedMetricError,
)
from .inference import Chain, EvaluationPlan
from .params import (
    PARAMETER_NAMES,
    AleatoricSpec,
    OperatingCondition,
    ParameterSet,
    PriorCollection,
    perturb_condition,
)
from .system import OUTPUT_QOIS, QOI_KINDS, SCALAR_QOIS
from .utils import TORR, spawn_rngs


logger = logging.getLogger(__name__)

Mode = Literal["epistemic", "total"]
MODES: tuple[str, ...] = ("epistemic", "total")
MAX_FAILURE_FRACTION = 0.1
# QoIs predicted on the solver grid unless coordinates are given
GRID_QOIS: tuple[str, ...] = ("u_ion", "nu_anom")
PROFILE_PRESSURES: tuple[float, ...] = (5.0, 25.0, 50.0)  # uTorr


@dataclass(frozen=True, eq=False)
class PredictionTarget:
    condition: OperatingCondition
    qoi: str
    coords: Optional[np.ndarray] = None
    radius: Optional[float] = None
    source: Optional[Observation] = None

    @classmethod
    def from_observation(cls, o: Observation) -> "PredictionTarget":
        return cls(o.condition, o.qoi, o.coords, o.radius, source=o)


def default_targets(
    conditions: Iterable[OperatingCondition], qois: Sequence[str] = SCALAR_QOIS
) -> list[PredictionTarget]:
    """Scalar QoIs, and grid profiles, at every condition."""
    allowed = [q for q in OUTPUT_QOIS if q != "j_ion"]
    if not set(qois) <= set(allowed):
        raise ConfigurationError(
            f"Default targets cover {', '.join(allowed)}; "
            f"j_ion needs explicit sweep coordinates"
        )
    return [PredictionTarget(c, q) for c in conditions for q in qois]


def profile_targets(
    condition: OperatingCondition,
    pressures: Sequence[float] = PROFILE_PRESSURES,
    qoi: str = "nu_anom",
) -> list[PredictionTarget]:
    """One grid profile per background pressure (uTorr), other settings held."""
    return default_targets(
        [replace(condition, background_pressure=p * 1e-6 * TORR) for p in pressures],
        (qoi,),
    )


def targets_from_datasets(datasets: Sequence[Dataset]) -> list[PredictionTarget]:
    return [
        PredictionTarget.from_observation(o) for d in datasets for o in d.observations
    ]


@dataclass(eq=False)
class Prediction:
    """N output samples for one target. Rows of failed evaluations are NaN."""

    target: PredictionTarget
    samples: np.ndarray  # (N, m)
    coords: Optional[np.ndarray] = None

    @property
    def valid(self) -> np.ndarray:
        return self.samples[np.all(np.isfinite(self.samples), axis=1)]

    def quantile(self, q: float) -> np.ndarray:
        return np.percentile(self.valid, q, axis=0)

    @property
    def q5(self) -> np.ndarray:
        return self.quantile(5)

    @property
    def q50(self) -> np.ndarray:
        return self.quantile(50)

    @property
    def q95(self) -> np.ndarray:
        return self.quantile(95)

    def columns(self) -> dict[str, np.ndarray]:
        """Columnar export: coordinate (if any), q5, q50, q95."""
        out = {}
        if self.coords is not None:
            out["phi" if self.target.qoi == "j_ion" else "z"] = self.coords
        out.update(q5=self.q5, q50=self.q50, q95=self.q95)
        return out


@dataclass(eq=False)
class PredictionEnsemble:
    mode: Mode
    predictions: list[Prediction]
    n_samples: int
    failures: int = 0
    evaluations: int = 0
    metadata: dict[str, Any] = field(default_factory=dict)

    def for_observation(self, o: Observation) -> Prediction:
        for p in self.predictions:
            if p.target.source is o:
                return p
        raise KeyError(f"No prediction for the {o.qoi} observation at {o.condition}")

    def select(
        self, qoi: str, condition: Optional[OperatingCondition] = None
    ) -> list[Prediction]:
        return [
            p
            for p in self.predictions
            if p.target.qoi == qoi
            and (condition is None or p.target.condition == condition)
        ]


def _theta(names: Sequence[str], row: np.ndarray) -> ParameterSet | np.ndarray:
    if tuple(names) == PARAMETER_NAMES:
        return ParameterSet.from_vector(row)
    return np.asarray(row, dtype=float)


def propagate(
    model: Any,
    names: Sequence[str],
    rows: np.ndarray,
    targets: Sequence[PredictionTarget],
    mode: Mode = "epistemic",
    sigmas: Optional[AleatoricSpec] = None,
    rng: Optional[np.random.Generator] = None,
) -> PredictionEnsemble:
    """
    Evaluate the model at every parameter row for every target condition. In
    total mode each (row, condition) pair gets its own perturbed condition.
    """
    if mode not in MODES:
        raise ConfigurationError(f"Unknown prediction mode {mode!r}")
    sigmas = sigmas if sigmas is not None else AleatoricSpec()
    rng = rng if rng is not None else np.random.default_rng()
    plan = EvaluationPlan.for_observations(targets)
    thetas = [_theta(names, row) for row in rows]

    points = []
    requests = []
    for theta in thetas:
        for condition, request in zip(plan.conditions, plan.requests):
            if mode == "total":
                condition = perturb_condition(condition, rng, sigmas)
            points.append((theta, condition))
            requests.append(request)
    outputs = model.evaluate_many(points, requests)

    failures = sum(isinstance(o, HallcalError) for o in outputs)
    if outputs and failures > MAX_FAILURE_FRACTION * len(outputs):
        raise PredictionFailureError(
            f"{failures} of {len(outputs)} model evaluations failed "
            f"(more than {MAX_FAILURE_FRACTION:.0%})"
        )
    if failures:
        logger.warning(
            "Excluded %d failed evaluations out of %d", failures, len(outputs)
        )

    n = len(thetas)
    per_theta = len(plan.conditions)
    predictions = []
    for target in targets:
        column = plan.conditions.index(target.condition)
        rows_out: list[Optional[np.ndarray]] = []
        coords = target.coords
        for k in range(n):
            output = outputs[k * per_theta + column]
            if isinstance(output, HallcalError):
                rows_out.append(None)
                continue
            if target.qoi in GRID_QOIS and coords is None:
                coords = output.z
            rows_out.append(output.values(target.qoi, coords, target.radius))
        width = next((len(r) for r in rows_out if r is not None), 1)
        samples = np.array(
            [np.full(width, np.nan) if r is None else r for r in rows_out]
        ).reshape(n, width)
        predictions.append(Prediction(target, samples, coords))

    return PredictionEnsemble(
        mode=mode,
        predictions=predictions,
        n_samples=n,
        failures=failures,
        evaluations=len(outputs),
    )


def posterior_predict(
    model: Any,
    chain: Chain,
    targets: Sequence[PredictionTarget],
    mode: Mode = "epistemic",
    N: int = 1000,
    seed: Optional[int] = None,
    sigmas: Optional[AleatoricSpec] = None,
) -> PredictionEnsemble:
    """Push N posterior draws, taken with replacement after burn-in, through the model."""
    theta_rng, aleatoric_rng = spawn_rngs(seed, 2)
    kept = chain.post_burn_in
    rows = kept[theta_rng.integers(0, len(kept), size=N)]
    ensemble = propagate(model, chain.names, rows, targets, mode, sigmas, aleatoric_rng)
    ensemble.metadata.update(source="posterior", seed=seed, kept=len(kept))
    return ensemble


def prior_predict(
    model: Any,
    priors: PriorCollection,
    targets: Sequence[PredictionTarget],
    mode: Mode = "total",
    N: int = 1000,
    seed: Optional[int] = None,
    sigmas: Optional[AleatoricSpec] = None,
) -> PredictionEnsemble:
    theta_rng, aleatoric_rng = spawn_rngs(seed, 2)
    rows = np.array([priors.sample_vector(theta_rng) for _ in range(N)])
    ensemble = propagate(model, priors.names, rows, targets, mode, sigmas, aleatoric_rng)
    ensemble.metadata.update(source="prior", seed=seed)
    return ensemble


def point_predict(
    model: Any,
    names: Sequence[str],
    theta: Sequence[float],
    targets: Sequence[PredictionTarget],
) -> PredictionEnsemble:
    """A single evaluation at fixed parameters and nominal conditions."""
    rows = np.asarray(theta, dtype=float)[np.newaxis, :]
    return propagate(model, names, rows, targets, "epistemic")


# Metrics


def relative_l2_error(y: np.ndarray, f: np.ndarray) -> float:
    y = np.asarray(y, dtype=float)
    norm = np.linalg.norm(y)
    if norm == 0.0:
        raise UndefinedMetricError("Relative error is undefined for all-zero data")
    return float(np.linalg.norm(y - np.asarray(f, dtype=float)) / norm)


@dataclass(frozen=True)
class QoiMetrics:
    mu: float
    sigma: float
    mu50: float
    xi: float = float("nan")
    n: int = 0

    @property
    def mu50_over_xi(self) -> float:
        return self.mu50 / self.xi if self.xi > 0.0 else float("nan")


def sample_errors(
    ensemble: PredictionEnsemble, observations: Sequence[Observation]
) -> np.ndarray:
    """E_q for each input sample over the observations of one QoI, NaN where failed."""
    y = np.concatenate([o.values for o in observations])
    f = np.concatenate(
        [ensemble.for_observation(o).samples for o in observations], axis=1
    )
    errors = np.full(len(f), np.nan)
    for k, row in enumerate(f):
        if np.all(np.isfinite(row)):
            errors[k] = relative_l2_error(y, row)
    return errors


def error_metrics(
    ensemble: PredictionEnsemble,
    median: PredictionEnsemble,
    datasets: Sequence[Dataset],
    xi: Optional[Mapping[str, float]] = None,
) -> dict[str, QoiMetrics]:
    """
    mu and sigma of E_q over the ensemble's input samples, and mu50 from the
    single evaluation at the median parameters, per QoI across the datasets.
    Both ensembles must be built from targets_from_datasets(datasets).
    """
    xi = xi or {}
    metrics = {}
    for qoi in (q for q in QOI_KINDS if any(q in d.qois for d in datasets)):
        observations = [o for d in datasets for o in d.observations_of(qoi)]
        errors = sample_errors(ensemble, observations)
        errors = errors[np.isfinite(errors)]
        metrics[qoi] = QoiMetrics(
            mu=float(np.mean(errors)) if len(errors) else float("nan"),
            sigma=float(np.std(errors)) if len(errors) else float("nan"),
            mu50=float(sample_errors(median, observations)[0]),
            xi=float(xi.get(qoi, float("nan"))),
            n=len(errors),
        )
    return metrics


def _format_table(
    header: Sequence[str], rows: Sequence[Sequence[str]], left: int
) -> str:
    lines = [tuple(header)] + [tuple(r) for r in rows]
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    text = [
        "  ".join(
            cell.ljust(w) if i < left else cell.rjust(w)
            for i, (cell, w) in enumerate(zip(line, widths))
        )
        for line in lines
    ]
    text.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(text) + "\n"


def format_metrics_table(rows: Mapping[str, Mapping[str, QoiMetrics]]) -> str:
    """One block per QoI with a row per label (e.g. Prior, Posterior), in percent."""
    body = []
    for qoi in (q for q in QOI_KINDS if any(q in m for m in rows.values())):
        for label, metrics in rows.items():
            if qoi not in metrics:
                continue
            m = metrics[qoi]
            body.append(
                (
                    qoi,
                    label,
                    f"{100 * m.xi:.1f}",
                    f"{100 * m.mu50:.1f}",
                    f"{100 * m.mu:.1f}",
                    f"{100 * m.sigma:.1f}",
                    f"{m.mu50_over_xi:.2f}",
                )
            )
    header = ("QoI", "", "xi (%)", "mu50 (%)", "mu (%)", "sigma (%)", "mu50/xi")
    return _format_table(header, body, left=2)


@dataclass(frozen=True)
class Comparison:
    dataset: str
    qoi: str
    condition: OperatingCondition
    data: float
    median: float
    q5: float
    q95: float


def compare_to_data(
    ensemble: PredictionEnsemble, datasets: Sequence[Dataset]
) -> list[Comparison]:
    """Scalar observations next to the predicted median and 90% interval."""
    rows = []
    for dataset in datasets:
        for o in dataset.observations:
            if o.qoi not in SCALAR_QOIS:
                continue
            p = ensemble.for_observation(o)
            rows.append(
                Comparison(
                    dataset=str(dataset.id),
                    qoi=o.qoi,
                    condition=o.condition,
                    data=float(o.values[0]),
                    median=float(p.q50[0]),
                    q5=float(p.q5[0]),
                    q95=float(p.q95[0]),
                )
            )
    return rows


def format_comparison_table(rows: Sequence[Comparison]) -> str:
    body = [
        (
            r.dataset,
            r.qoi,
            str(r.condition),
            f"{r.data:.4g}",
            f"{r.median:.4g}",
            f"{r.q5:.4g}",
            f"{r.q95:.4g}",
        )
        for r in rows
    ]
    header = ("Dataset", "QoI", "Condition", "Data", "Sim. median", "Sim. 5th", "Sim. 95th")
    return _format_table(header, body, left=3)
