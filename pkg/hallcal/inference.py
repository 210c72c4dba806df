"""
Dataset-normalized Gaussian likelihood and the delayed rejection adaptive
Metropolis (DRAM) sampler.
"""

from dataclasses import dataclass, field
import logging
from typing import Any, Callable, Iterable, Mapping, Optional, Self, Sequence

import numpy as np

from .datasets import Dataset
from .errors import (
    ConfigurationError,
    EmptyChainError,
    HallcalError,
    UndefinedMetricError,
)
from .params import (
    PARAMETER_NAMES,
    OperatingCondition,
    ParameterSet,
    PriorCollection,
    log_prior_density,
)
from .system import OutputRequest, SystemModel, SystemOutput


logger = logging.getLogger(__name__)

LogDensity = Callable[[np.ndarray], float]
WindowCallback = Callable[["Chain", int, int], None]


@dataclass(frozen=True)
class LikelihoodConfig:
    """Target relative error gamma_q / sqrt(n_q) per QoI."""

    default_target: float = 0.025
    targets: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", dict(self.targets))
        for qoi, value in {"default": self.default_target, **self.targets}.items():
            if not value > 0.0:
                raise ConfigurationError(
                    f"Likelihood target for {qoi} must be positive, got {value}"
                )

    def target(self, qoi: str) -> float:
        return self.targets.get(qoi, self.default_target)

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        return cls(
            default_target=float(config.get("default", 0.025)),
            targets={k: float(v) for k, v in config.get("targets", {}).items()},
        )


@dataclass(frozen=True)
class DramConfig:
    n_samples: int = 50_000
    burn_in_fraction: float = 0.5
    adaptation_interval: int = 100
    adaptation_start: int = 200
    initial_scale: float = 0.02  # fraction of the prior width
    dr_scale_factor: float = 0.2
    regularization: float = 1e-6
    delayed_rejection: bool = True
    adaptive: bool = True
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ConfigurationError("n_samples must be at least 1")
        if not 0.0 < self.burn_in_fraction < 1.0:
            raise ConfigurationError("burn_in_fraction must lie in (0, 1)")
        if self.adaptation_interval < 1:
            raise ConfigurationError("adaptation_interval must be at least 1")
        if self.initial_scale <= 0.0 or self.dr_scale_factor <= 0.0:
            raise ConfigurationError("Proposal scales must be positive")
        if self.regularization < 0.0:
            raise ConfigurationError("regularization must be nonnegative")

    @classmethod
    def from_config(cls, config: Mapping[str, Any]) -> Self:
        renamed = {"samples": "n_samples"}
        values = {renamed.get(k, k): v for k, v in config.items()}
        unknown = set(values) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigurationError(f"Unknown keys in [sampler]: {sorted(unknown)}")
        return cls(**values)


@dataclass
class Chain:
    """
    Sampler output. Row 0 is the initial state. stage is 1 or 2 for moves
    accepted at that stage, 0 otherwise.
    """

    names: tuple[str, ...]
    samples: np.ndarray
    log_posterior: np.ndarray
    accepted: np.ndarray
    stage: np.ndarray
    burn_in_fraction: float = 0.5
    delayed_rejection: bool = True
    stalls: int = 0
    failures: int = 0

    def __post_init__(self) -> None:
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.log_posterior = np.asarray(self.log_posterior, dtype=float)
        self.accepted = np.asarray(self.accepted, dtype=bool)
        self.stage = np.asarray(self.stage, dtype=int)
        n = len(self.samples)
        if not len(self.log_posterior) == len(self.accepted) == len(self.stage) == n:
            raise ValueError("Chain columns must have equal lengths")
        if self.samples.shape[1] != len(self.names):
            raise ValueError(
                f"{self.samples.shape[1]} sample columns for {len(self.names)} names"
            )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def burn_in(self) -> int:
        return int(len(self) * self.burn_in_fraction)

    @property
    def post_burn_in(self) -> np.ndarray:
        kept = self.samples[self.burn_in :]
        if len(kept) == 0:
            raise EmptyChainError("The chain has no samples after burn-in")
        return kept

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]

    def parameter_set(self, row: np.ndarray) -> ParameterSet:
        return ParameterSet.from_mapping(dict(zip(self.names, row)))

    def medians(self) -> np.ndarray:
        """Coordinatewise median of the post-burn-in samples."""
        return np.median(self.post_burn_in, axis=0)

    def head(self, n: int) -> Self:
        return type(self)(
            names=self.names,
            samples=self.samples[:n],
            log_posterior=self.log_posterior[:n],
            accepted=self.accepted[:n],
            stage=self.stage[:n],
            burn_in_fraction=self.burn_in_fraction,
            delayed_rejection=self.delayed_rejection,
            stalls=self.stalls,
            failures=self.failures,
        )


# Likelihood


@dataclass(frozen=True)
class EvaluationPlan:
    """One model evaluation per distinct condition, requesting what the data needs."""

    conditions: tuple[OperatingCondition, ...]
    requests: tuple[OutputRequest, ...]

    @classmethod
    def for_observations(cls, observations: Iterable[Any]) -> Self:
        """Plan for anything carrying condition, qoi, coords and radius."""
        requests: dict[OperatingCondition, OutputRequest] = {}
        for o in observations:
            request = requests.get(o.condition, OutputRequest(frozenset()))
            if o.qoi == "j_ion":
                request = request.with_sweep(o.radius, o.coords)
            else:
                request = OutputRequest(request.qois | {o.qoi}, request.sweeps)
            requests[o.condition] = request
        return cls(tuple(requests), tuple(requests.values()))

    @classmethod
    def for_datasets(cls, datasets: Sequence[Dataset]) -> Self:
        return cls.for_observations(o for d in datasets for o in d.observations)

    def request_for(self, condition: OperatingCondition) -> OutputRequest:
        return self.requests[self.conditions.index(condition)]

    def evaluate(
        self, model: SystemModel, theta: ParameterSet
    ) -> dict[OperatingCondition, SystemOutput | HallcalError]:
        outputs = model.evaluate_many(
            [(theta, c) for c in self.conditions], list(self.requests)
        )
        return dict(zip(self.conditions, outputs))


def relative_residuals(
    datasets: Sequence[Dataset],
    outputs: Mapping[OperatingCondition, SystemOutput],
) -> list[tuple[Dataset, str, float]]:
    """(dataset, qoi, ||y - f||^2 / ||y||^2) for every QoI of every dataset."""
    terms = []
    for dataset in datasets:
        for qoi in dataset.qois:
            squared_error = 0.0
            squared_norm = 0.0
            for o in dataset.observations_of(qoi):
                f = o.model_values(outputs[o.condition])
                squared_error += float(np.sum((o.values - f) ** 2))
                squared_norm += float(np.sum(o.values**2))
            if squared_norm == 0.0:
                raise UndefinedMetricError(f"{dataset.id}: {qoi} data are all zero")
            terms.append((dataset, qoi, squared_error / squared_norm))
    return terms


def log_likelihood_from_outputs(
    datasets: Sequence[Dataset],
    outputs: Mapping[OperatingCondition, SystemOutput | HallcalError],
    cfg: LikelihoodConfig,
) -> float:
    if any(isinstance(o, HallcalError) for o in outputs.values()):
        return -np.inf
    total = 0.0
    for dataset, qoi, relative in relative_residuals(datasets, outputs):
        n_q = dataset.n_q(qoi)
        gamma_sq = cfg.target(qoi) ** 2 * n_q
        total -= 0.5 * n_q / gamma_sq * relative
    return total if np.isfinite(total) else -np.inf


def log_likelihood(
    theta: ParameterSet,
    datasets: Sequence[Dataset],
    cfg: LikelihoodConfig,
    model: SystemModel,
    plan: Optional[EvaluationPlan] = None,
) -> float:
    """
    -1/2 sum_q (n_q / gamma_q^2) ||y_q - f_q||^2 / ||y_q||^2, summed over the
    QoIs of every dataset. The normalizing constant is dropped. Any failed
    model evaluation scores -inf.
    """
    plan = plan or EvaluationPlan.for_datasets(datasets)
    return log_likelihood_from_outputs(datasets, plan.evaluate(model, theta), cfg)


def log_posterior(
    theta: ParameterSet,
    datasets: Sequence[Dataset],
    cfg: LikelihoodConfig,
    priors: PriorCollection,
    model: SystemModel,
    plan: Optional[EvaluationPlan] = None,
) -> float:
    lp = log_prior_density(theta, priors)
    if lp == -np.inf:
        return -np.inf
    return lp + log_likelihood(theta, datasets, cfg, model, plan)


# Sampler


class _RunningMoments:
    """Welford mean and covariance of the chain history."""

    def __init__(self, dim: int) -> None:
        self.n = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros((dim, dim))

    def push(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._m2 += np.outer(delta, x - self.mean)

    @property
    def covariance(self) -> np.ndarray:
        return self._m2 / max(self.n - 1, 1)


def _log_q_ratio(
    inverse: np.ndarray, y1: np.ndarray, y2: np.ndarray, x: np.ndarray
) -> float:
    """log N(y1; y2, C) - log N(y1; x, C) for the first-stage covariance C."""
    a = y1 - y2
    b = y1 - x
    return -0.5 * (a @ inverse @ a - b @ inverse @ b)


def _log_one_minus_alpha(lp_from: float, lp_to: float) -> float:
    log_alpha = min(0.0, lp_to - lp_from)
    if log_alpha == 0.0:
        return -np.inf
    return float(np.log1p(-np.exp(log_alpha)))


def dram_sample(
    target: LogDensity,
    init: np.ndarray,
    cfg: DramConfig,
    proposal_sd: np.ndarray,
    names: Optional[Sequence[str]] = None,
    on_window: Optional[WindowCallback] = None,
) -> Chain:
    """
    Delayed rejection adaptive Metropolis.

    A rejected first-stage proposal is retried once with the covariance scaled
    by dr_scale_factor^2, using the delayed-rejection acceptance ratio so the
    chain stays reversible. Every adaptation_interval steps after
    adaptation_start the first-stage covariance becomes
    s_d (Cov(history) + eps diag(C0)) with s_d = 2.38^2 / d.
    """
    x = np.array(init, dtype=float)
    d = len(x)
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(d))
    proposal_sd = np.broadcast_to(np.asarray(proposal_sd, dtype=float), (d,))
    if np.any(proposal_sd <= 0.0):
        raise ConfigurationError("Proposal standard deviations must be positive")
    lp_x = target(x)
    if not np.isfinite(lp_x):
        raise ConfigurationError("The target density is not finite at the initial state")

    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_samples
    samples = np.empty((n, d))
    log_post = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    stage = np.zeros(n, dtype=int)
    samples[0], log_post[0] = x, lp_x

    initial_cov = np.diag(proposal_sd**2)
    s_d = 2.38**2 / d
    cov = initial_cov
    chol = np.linalg.cholesky(cov)
    inverse = np.linalg.inv(cov)
    dr = cfg.dr_scale_factor
    moments = _RunningMoments(d)
    moments.push(x)
    stalls = 0
    window_accepts = 0
    window_start = 0

    def _chain(stop: int) -> Chain:
        return Chain(
            names=names,
            samples=samples[:stop],
            log_posterior=log_post[:stop],
            accepted=accepted[:stop],
            stage=stage[:stop],
            burn_in_fraction=cfg.burn_in_fraction,
            delayed_rejection=cfg.delayed_rejection,
            stalls=stalls,
        )

    for i in range(1, n):
        y1 = x + chol @ rng.standard_normal(d)
        lp_1 = target(y1)
        if np.log(rng.random()) < lp_1 - lp_x:
            x, lp_x = y1, lp_1
            accepted[i], stage[i] = True, 1
        elif cfg.delayed_rejection:
            y2 = x + dr * (chol @ rng.standard_normal(d))
            lp_2 = target(y2)
            log_alpha = -np.inf
            if np.isfinite(lp_2):
                log_alpha = (
                    lp_2
                    - lp_x
                    + _log_q_ratio(inverse, y1, y2, x)
                    + _log_one_minus_alpha(lp_2, lp_1)
                    - _log_one_minus_alpha(lp_x, lp_1)
                )
            if np.log(rng.random()) < log_alpha:
                x, lp_x = y2, lp_2
                accepted[i], stage[i] = True, 2

        samples[i], log_post[i] = x, lp_x
        moments.push(x)
        window_accepts += accepted[i]

        if i % cfg.adaptation_interval == 0:
            if window_accepts == 0:
                stalls += 1
                logger.warning(
                    "No moves accepted in steps %d-%d; the proposal may be too wide",
                    window_start + 1,
                    i,
                )
            if cfg.adaptive and i >= cfg.adaptation_start:
                candidate = s_d * (
                    moments.covariance + cfg.regularization * initial_cov
                )
                try:
                    chol = np.linalg.cholesky(candidate)
                except np.linalg.LinAlgError:
                    logger.warning("Adapted covariance is not positive definite; kept")
                else:
                    cov = candidate
                    inverse = np.linalg.inv(cov)
            logger.debug(
                "Step %d: window acceptance %.3f, log posterior %.4g",
                i,
                window_accepts / (i - window_start),
                lp_x,
            )
            if on_window is not None:
                on_window(_chain(i + 1), window_start + 1, i + 1)
            window_accepts = 0
            window_start = i

        if i % max(n // 10, 1) == 0:
            logger.info(
                "Sampled %d/%d, acceptance %.3f", i, n, accepted[1 : i + 1].mean()
            )

    if on_window is not None and window_start + 1 < n:
        on_window(_chain(n), window_start + 1, n)
    return _chain(n)


def calibrate(
    model: SystemModel,
    datasets: Sequence[Dataset],
    priors: PriorCollection,
    likelihood: LikelihoodConfig,
    cfg: DramConfig,
    init: Optional[ParameterSet] = None,
    on_window: Optional[WindowCallback] = None,
) -> Chain:
    """
    Sample the posterior of one thruster's parameters given its training data.
    Proposals act on log10 of log-uniform parameters; the returned chain holds
    parameters in linear space.
    """
    thrusters = {d.thruster_id for d in datasets}
    if len(thrusters) != 1:
        raise ConfigurationError(
            f"Calibrate one thruster at a time, got datasets for {sorted(thrusters)}"
        )
    if priors.names != PARAMETER_NAMES:
        raise ConfigurationError("Priors must cover the model parameters in order")

    plan = EvaluationPlan.for_datasets(datasets)
    init_vector = priors.midpoint() if init is None else init.to_vector()
    u0 = priors.to_transformed(init_vector)

    def target(u: np.ndarray) -> float:
        vector = priors.from_transformed(u)
        if not priors.contains(vector):
            return -np.inf
        theta = ParameterSet.from_vector(vector)
        return log_posterior(theta, datasets, likelihood, priors, model, plan) + (
            priors.log_jacobian(u)
        )

    def to_linear(chain: Chain) -> Chain:
        linear = np.array([priors.from_transformed(u) for u in chain.samples])
        jacobian = np.array([priors.log_jacobian(u) for u in chain.samples])
        return Chain(
            names=PARAMETER_NAMES,
            samples=linear,
            log_posterior=chain.log_posterior - jacobian,
            accepted=chain.accepted,
            stage=chain.stage,
            burn_in_fraction=chain.burn_in_fraction,
            delayed_rejection=chain.delayed_rejection,
            stalls=chain.stalls,
            failures=model.failures,
        )

    def forward(chain: Chain, start: int, stop: int) -> None:
        on_window(to_linear(chain), start, stop)

    logger.info(
        "Calibrating %s against %d dataset(s), %d condition(s), %d samples",
        thrusters.pop(),
        len(datasets),
        len(plan.conditions),
        cfg.n_samples,
    )
    chain = dram_sample(
        target,
        u0,
        cfg,
        cfg.initial_scale * priors.transformed_widths(),
        names=PARAMETER_NAMES,
        on_window=forward if on_window is not None else None,
    )
    logger.info(
        "Calibration done: %d model evaluations, %d cache hits, %d failures",
        model.evaluations,
        model.cache_hits,
        model.failures,
    )
    return to_linear(chain)


# Diagnostics


def effective_sample_size(x: np.ndarray) -> float:
    """Initial-positive-sequence ESS from the FFT autocorrelation."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    centered = x - x.mean()
    if n < 2 or not np.any(centered):
        return float(n)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    spectrum = np.fft.rfft(centered, size)
    acf = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    acf /= acf[0]
    pairs = acf[: n - n % 2].reshape(-1, 2).sum(axis=1)
    negative = np.nonzero(pairs <= 0.0)[0]
    cut = negative[0] if len(negative) else len(pairs)
    tau = -1.0 + 2.0 * pairs[:cut].sum()
    return float(n / max(tau, 1.0))


QUANTILE_COLUMNS = ("Min", "5th", "50th", "95th", "Max", "Std")


@dataclass(frozen=True)
class ChainDiagnostics:
    names: tuple[str, ...]
    acceptance_stage1: float
    acceptance_stage2: float
    acceptance: float
    quantiles: np.ndarray  # (d, 6): min, 5th, 50th, 95th, max, std
    ess: np.ndarray
    log_names: frozenset[str]
    stalls: int
    failures: int
    kept: int

    def row(self, name: str) -> np.ndarray:
        return self.quantiles[self.names.index(name)]


def chain_diagnostics(
    chain: Chain, log_names: Sequence[str] = ("c4", "c5")
) -> ChainDiagnostics:
    """
    Acceptance rates per stage and the quantile summary of the post-burn-in
    chain. Parameters in log_names are summarized by their base-10 exponent.
    """
    kept = chain.post_burn_in.copy()
    log_names = frozenset(n for n in log_names if n in chain.names)
    for name in log_names:
        column = chain.names.index(name)
        kept[:, column] = np.log10(kept[:, column])

    moves = max(len(chain) - 1, 1)
    first = int(np.sum(chain.stage[1:] == 1))
    second = int(np.sum(chain.stage[1:] == 2))
    retries = moves - first if chain.delayed_rejection else 0
    quantiles = np.column_stack(
        (
            kept.min(axis=0),
            np.percentile(kept, 5, axis=0),
            np.percentile(kept, 50, axis=0),
            np.percentile(kept, 95, axis=0),
            kept.max(axis=0),
            kept.std(axis=0),
        )
    )
    return ChainDiagnostics(
        names=chain.names,
        acceptance_stage1=first / moves,
        acceptance_stage2=second / retries if retries else 0.0,
        acceptance=(first + second) / moves,
        quantiles=quantiles,
        ess=np.array([effective_sample_size(c) for c in kept.T]),
        log_names=log_names,
        stalls=chain.stalls,
        failures=chain.failures,
        kept=len(kept),
    )


def format_summary_table(diagnostics: ChainDiagnostics) -> str:
    """1-D marginal summary, one row per parameter."""
    header = ("Parameter", *QUANTILE_COLUMNS, "ESS")
    rows = []
    for name, q, ess in zip(diagnostics.names, diagnostics.quantiles, diagnostics.ess):
        label = f"log10 {name}" if name in diagnostics.log_names else name
        rows.append((label, *(f"{v:.4g}" for v in q), f"{ess:.0f}"))
    widths = [max(len(r[i]) for r in (header, *rows)) for i in range(len(header))]
    lines = [
        "  ".join(
            cell.ljust(w) if i == 0 else cell.rjust(w)
            for i, (cell, w) in enumerate(zip(row, widths))
        )
        for row in (header, *rows)
    ]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(
        f"Acceptance: {diagnostics.acceptance:.3f} "
        f"(stage 1 {diagnostics.acceptance_stage1:.3f}, "
        f"stage 2 {diagnostics.acceptance_stage2:.3f}); "
        f"{diagnostics.kept} samples after burn-in; "
        f"{diagnostics.stalls} stalled windows; "
        f"{diagnostics.failures} failed evaluations"
    )
    return "\n".join(lines) + "\n"
