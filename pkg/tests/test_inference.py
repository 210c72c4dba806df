import numpy as np
import pytest
from scipy import stats

from hallcal.artifacts import ChainStore
from hallcal.datasets import Dataset, Observation, synthesize_dataset
from hallcal.errors import (
    ConfigurationError,
    EmptyChainError,
    SolverDivergenceError,
    UndefinedMetricError,
)
from hallcal.inference import (
    Chain,
    DramConfig,
    EvaluationPlan,
    LikelihoodConfig,
    calibrate,
    chain_diagnostics,
    dram_sample,
    effective_sample_size,
    format_summary_table,
    log_likelihood_from_outputs,
    log_posterior,
)
from hallcal.params import PARAMETER_NAMES, OperatingCondition, PriorCollection
from hallcal.system import SystemOutput


def _dataset(condition, values, qoi="I_D"):
    return Dataset("lab", "SPT-100", observations=[Observation(qoi, condition, values)])


def _outputs(condition, I_D):
    return {condition: SystemOutput(V_cc=30.0, I_D=I_D)}


def test_likelihood_reference_value(condition):
    dataset = _dataset(condition, [1.0])
    ll = log_likelihood_from_outputs([dataset], _outputs(condition, 0.9), LikelihoodConfig())
    assert ll == pytest.approx(-8.0)


def test_likelihood_perfect_fit(condition):
    dataset = _dataset(condition, [4.5])
    ll = log_likelihood_from_outputs([dataset], _outputs(condition, 4.5), LikelihoodConfig())
    assert ll == 0.0


def test_likelihood_is_scale_invariant(condition):
    cfg = LikelihoodConfig()
    base = log_likelihood_from_outputs(
        [_dataset(condition, [1.0])], _outputs(condition, 0.9), cfg
    )
    scaled = log_likelihood_from_outputs(
        [_dataset(condition, [1e3])], _outputs(condition, 900.0), cfg
    )
    assert scaled == pytest.approx(base)


def test_likelihood_does_not_grow_with_conditions(condition):
    other = OperatingCondition.from_units(300.0, 10.0, 5.0, pressure_unit="uTorr")
    dataset = Dataset(
        "lab",
        "SPT-100",
        observations=[
            Observation("I_D", condition, [1.0]),
            Observation("I_D", other, [1.0]),
        ],
    )
    outputs = {c: SystemOutput(V_cc=30.0, I_D=0.9) for c in (condition, other)}
    ll = log_likelihood_from_outputs([dataset], outputs, LikelihoodConfig())
    assert ll == pytest.approx(-8.0)


def test_likelihood_per_qoi_target(condition):
    cfg = LikelihoodConfig(targets={"I_D": 0.05})
    ll = log_likelihood_from_outputs(
        [_dataset(condition, [1.0])], _outputs(condition, 0.9), cfg
    )
    assert ll == pytest.approx(-2.0)


def test_failed_evaluation_scores_minus_infinity(condition):
    outputs = {condition: SolverDivergenceError(10, "T_e", 1e-6)}
    ll = log_likelihood_from_outputs(
        [_dataset(condition, [1.0])], outputs, LikelihoodConfig()
    )
    assert ll == -np.inf


def test_all_zero_data(condition):
    with pytest.raises(UndefinedMetricError):
        log_likelihood_from_outputs(
            [_dataset(condition, [0.0])], _outputs(condition, 0.9), LikelihoodConfig()
        )


def test_likelihood_config_validation():
    with pytest.raises(ConfigurationError):
        LikelihoodConfig(default_target=0.0)
    cfg = LikelihoodConfig.from_config({"default": 0.03, "targets": {"T_c": 0.01}})
    assert cfg.target("T_c") == 0.01
    assert cfg.target("I_D") == 0.03


def test_prior_rejection_skips_the_model(theta, condition):
    class Untouchable:
        def evaluate_many(self, *args, **kwargs):
            raise AssertionError("the model must not run outside the prior")

    lp = log_posterior(
        theta.replace(beta_anom=2.0),
        [_dataset(condition, [1.0])],
        LikelihoodConfig(),
        PriorCollection(),
        Untouchable(),
    )
    assert lp == -np.inf


def test_evaluation_plan_merges_requests(condition):
    observations = [
        Observation("I_D", condition, [4.5]),
        Observation("T_c", condition, [0.08]),
        Observation("j_ion", condition, [1.0, 2.0], coords=[0.0, 0.5], radius=1.0),
    ]
    plan = EvaluationPlan.for_observations(observations)
    assert plan.conditions == (condition,)
    request = plan.request_for(condition)
    assert request.qois == {"I_D", "T_c", "j_ion"}
    assert request.sweeps == ((1.0, (0.0, 0.5)),)


# Sampler

COVARIANCE = np.array([[1.0, 0.8], [0.8, 1.0]])


def _gaussian(x):
    return float(stats.multivariate_normal.logpdf(x, np.zeros(2), COVARIANCE))


def test_dram_recovers_gaussian_moments():
    cfg = DramConfig(n_samples=20_000, seed=3, burn_in_fraction=0.2)
    chain = dram_sample(_gaussian, np.array([2.0, -2.0]), cfg, np.array([0.5, 0.5]))
    kept = chain.post_burn_in
    assert kept.mean(axis=0) == pytest.approx([0.0, 0.0], abs=0.1)
    assert np.cov(kept.T) == pytest.approx(COVARIANCE, abs=0.1)
    assert 0.1 < chain_diagnostics(chain).acceptance < 0.9


def test_dram_is_deterministic():
    cfg = DramConfig(n_samples=500, seed=11)
    a = dram_sample(_gaussian, np.zeros(2), cfg, np.ones(2))
    b = dram_sample(_gaussian, np.zeros(2), cfg, np.ones(2))
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.stage, b.stage)


def test_delayed_rejection_stage_two():
    cfg = DramConfig(n_samples=2000, seed=5, adaptive=False)
    chain = dram_sample(_gaussian, np.zeros(2), cfg, np.full(2, 5.0))
    assert np.any(chain.stage == 2)
    single = DramConfig(n_samples=2000, seed=5, adaptive=False, delayed_rejection=False)
    off = dram_sample(_gaussian, np.zeros(2), single, np.full(2, 5.0))
    assert not np.any(off.stage == 2)
    assert chain_diagnostics(off).acceptance_stage2 == 0.0


def test_dram_window_callback():
    windows = []
    cfg = DramConfig(n_samples=350, seed=1, adaptation_interval=100)
    dram_sample(
        _gaussian,
        np.zeros(2),
        cfg,
        np.ones(2),
        on_window=lambda chain, start, stop: windows.append((len(chain), start, stop)),
    )
    assert windows == [(101, 1, 101), (201, 101, 201), (301, 201, 301), (350, 301, 350)]


def test_dram_counts_stalls():
    start = np.zeros(2)

    def spike(x):
        return 0.0 if np.array_equal(x, start) else -np.inf

    cfg = DramConfig(n_samples=301, seed=2, adaptation_interval=100)
    chain = dram_sample(spike, start, cfg, np.ones(2))
    assert chain.stalls == 3
    assert not chain.accepted.any()
    assert np.all(chain.samples == 0.0)


def test_dram_needs_finite_start():
    with pytest.raises(ConfigurationError):
        dram_sample(lambda x: -np.inf, np.zeros(2), DramConfig(n_samples=10), np.ones(2))


def test_tiny_chain():
    chain = dram_sample(_gaussian, np.zeros(2), DramConfig(n_samples=10, seed=0), np.ones(2))
    assert len(chain) == 10
    assert chain.burn_in == 5
    diagnostics = chain_diagnostics(chain)
    assert diagnostics.kept == 5
    assert "x0" in format_summary_table(diagnostics)


@pytest.mark.slow
def test_dram_discrete_target():
    weights = np.array([0.2, 0.5, 0.3])

    def three_states(x):
        k = int(np.floor(x[0]))
        return float(np.log(weights[k])) if 0 <= k < 3 else -np.inf

    cfg = DramConfig(
        n_samples=1_000_000, seed=9, adaptive=False, burn_in_fraction=0.1
    )
    chain = dram_sample(three_states, np.array([1.5]), cfg, np.array([1.0]))
    states = np.floor(chain.post_burn_in[:, 0]).astype(int)
    frequencies = np.bincount(states, minlength=3) / len(states)
    assert frequencies == pytest.approx(weights, abs=0.01)


@pytest.mark.slow
def test_dram_five_dimensional_gaussian():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(5, 5))
    covariance = a @ a.T + 5.0 * np.eye(5)
    inverse = np.linalg.inv(covariance)

    def target(x):
        return -0.5 * float(x @ inverse @ x)

    cfg = DramConfig(n_samples=200_000, seed=4, burn_in_fraction=0.5)
    chain = dram_sample(target, np.zeros(5), cfg, np.full(5, 0.5))
    kept = chain.post_burn_in
    sigma = np.sqrt(np.diag(covariance))
    assert kept.mean(axis=0) == pytest.approx(np.zeros(5), abs=0.05 * sigma.min())
    scale = np.outer(sigma, sigma)
    assert np.all(np.abs(np.cov(kept.T) - covariance) <= 0.1 * scale)


# Diagnostics


def test_constant_chain_diagnostics():
    n = 100
    chain = Chain(
        names=("a", "b"),
        samples=np.tile([1.0, 2.0], (n, 1)),
        log_posterior=np.zeros(n),
        accepted=np.zeros(n, dtype=bool),
        stage=np.zeros(n, dtype=int),
    )
    diagnostics = chain_diagnostics(chain)
    assert diagnostics.acceptance == 0.0
    assert diagnostics.row("a") == pytest.approx([1.0, 1.0, 1.0, 1.0, 1.0, 0.0])
    assert diagnostics.ess == pytest.approx([50.0, 50.0])


def test_log_parameters_summarized_by_exponent():
    n = 20
    chain = Chain(
        names=("c4", "c0"),
        samples=np.tile([1e20, 0.5], (n, 1)),
        log_posterior=np.zeros(n),
        accepted=np.zeros(n, dtype=bool),
        stage=np.zeros(n, dtype=int),
    )
    diagnostics = chain_diagnostics(chain)
    assert diagnostics.row("c4")[2] == pytest.approx(20.0)
    assert "log10 c4" in format_summary_table(diagnostics)


def test_empty_chain():
    chain = Chain(
        names=("a",),
        samples=np.empty((0, 1)),
        log_posterior=[],
        accepted=[],
        stage=[],
    )
    with pytest.raises(EmptyChainError):
        chain.medians()


def test_effective_sample_size():
    rng = np.random.default_rng(0)
    white = rng.standard_normal(20_000)
    assert effective_sample_size(white) == pytest.approx(20_000, rel=0.2)

    rho = 0.9
    ar = np.empty(20_000)
    ar[0] = 0.0
    for i in range(1, len(ar)):
        ar[i] = rho * ar[i - 1] + rng.standard_normal()
    expected = len(ar) * (1 - rho) / (1 + rho)
    assert effective_sample_size(ar) == pytest.approx(expected, rel=0.3)


# Calibration of the cathode against coupling-voltage data only


@pytest.fixture
def vcc_data(model, theta):
    conditions = [
        OperatingCondition.from_units(300.0, p, 5.0, pressure_unit="uTorr")
        for p in (1.0, 10.0, 30.0, 60.0)
    ]
    return synthesize_dataset(model, theta, conditions, 0.0, seed=0, qois=["V_cc"])


def test_calibrate_chain_layout(model, vcc_data, tmp_path):
    cfg = DramConfig(n_samples=300, seed=0, adaptation_interval=50)
    store = ChainStore.create(tmp_path / "chain.dat", PARAMETER_NAMES)
    chain = calibrate(
        model,
        [vcc_data],
        PriorCollection(),
        LikelihoodConfig(),
        cfg,
        on_window=lambda c, start, stop: store.append(c),
    )
    assert chain.names == PARAMETER_NAMES
    assert len(chain) == 300
    priors = PriorCollection()
    assert all(priors.contains(row) for row in chain.samples)
    assert np.all(chain.column("c4") > 1e17)
    persisted = store.chain
    assert np.allclose(persisted.samples, chain.samples, rtol=1e-15)
    assert model.evaluations + model.cache_hits > 0


def test_calibrate_one_thruster_at_a_time(model, vcc_data):
    other = Dataset("other", "BHT-600", observations=list(vcc_data.observations))
    with pytest.raises(ConfigurationError):
        calibrate(
            model,
            [vcc_data, other],
            PriorCollection(),
            LikelihoodConfig(),
            DramConfig(n_samples=10),
        )
