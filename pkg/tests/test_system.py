import pickle
from types import SimpleNamespace

import numpy as np
import pytest

from hallcal.cathode import CathodeParams, coupling_voltage
from hallcal.errors import ConfigurationError, DegenerateWidthError, DomainError, HallcalError
from hallcal.inference import Chain
from hallcal.params import PARAMETER_NAMES
from hallcal.system import (
    QOI_KINDS,
    OutputRequest,
    SystemModel,
    SystemOutput,
    component_order,
)
from hallcal.thruster import anomalous_inverse_hall
from hallcal.uq import posterior_predict, profile_targets


def test_component_order():
    assert component_order(["V_cc"]) == ["cathode"]
    assert component_order(["I_D"]) == ["cathode", "thruster"]
    assert component_order(["T_c", "V_cc"]) == ["cathode", "thruster", "plume"]


def test_request_defaults_to_everything():
    assert OutputRequest().qois == frozenset(QOI_KINDS)
    with pytest.raises(ConfigurationError):
        OutputRequest.only("thrust")


def test_request_with_sweep():
    request = OutputRequest.only("V_cc").with_sweep(1.0, [0.0, 0.5])
    assert "j_ion" in request.qois
    assert request.sweeps == ((1.0, (0.0, 0.5)),)


def test_cathode_only_request_skips_the_solver(model, theta, condition, monkeypatch):
    def fail(*args, **kwargs):
        raise AssertionError("the discharge solver must not run")

    monkeypatch.setattr("hallcal.system.solve_discharge", fail)
    output = model.evaluate(theta, condition, OutputRequest.only("V_cc"))
    expected = coupling_voltage(
        CathodeParams.from_parameters(theta), condition.background_pressure
    )
    assert output.V_cc == pytest.approx(expected)
    assert np.isnan(output.I_D)
    assert output.values("V_cc") == pytest.approx([expected])


def test_cache_hits(model, theta, condition):
    request = OutputRequest.only("V_cc")
    first = model.evaluate(theta, condition, request)
    second = model.evaluate(theta, condition, request)
    assert first is second
    assert model.evaluations == 1
    assert model.cache_hits == 1
    model.clear_cache()
    model.evaluate(theta, condition, request)
    assert model.evaluations == 2


def test_cache_is_bounded(geometry, field, xenon, theta, condition):
    model = SystemModel(geometry, field, xenon, cache_size=2)
    request = OutputRequest.only("V_cc")
    for T_ec in (1.0, 2.0, 3.0):
        model.evaluate(theta.replace(T_ec=T_ec), condition, request)
    model.evaluate(theta.replace(T_ec=1.0), condition, request)
    assert model.cache_hits == 0
    assert model.evaluations == 4


def test_evaluate_many_returns_errors(model, theta, condition):
    broken = theta.replace(P_T=0.0)
    results = model.evaluate_many(
        [(theta, condition), (broken, condition)], OutputRequest.only("V_cc")
    )
    assert isinstance(results[0], SystemOutput)
    assert isinstance(results[1], DomainError)
    assert isinstance(results[1], HallcalError)
    assert model.failures == 1


def test_evaluate_many_request_count(model, theta, condition):
    with pytest.raises(ValueError):
        model.evaluate_many([(theta, condition)], [OutputRequest(), OutputRequest()])


def test_evaluate_many_in_order(model, theta, condition):
    thetas = [theta.replace(V_vac=v) for v in (10.0, 20.0, 30.0)]
    results = model.evaluate_many(
        [(t, condition) for t in thetas], OutputRequest.only("V_cc")
    )
    assert [r.V_cc for r in results] == sorted(r.V_cc for r in results)


def test_model_pickles_without_cache(model, theta, condition):
    model.evaluate(theta, condition, OutputRequest.only("V_cc"))
    clone = pickle.loads(pickle.dumps(model))
    assert clone.fingerprint == model.fingerprint
    assert len(clone._cache) == 0


def test_fingerprint_tracks_settings(model):
    cheap = model.with_settings(model.settings.cheapened())
    assert cheap.fingerprint != model.fingerprint


def test_output_values_interpolate():
    output = SystemOutput(
        V_cc=30.0,
        z=np.array([0.0, 1.0]),
        u_ion=np.array([0.0, 10.0]),
        j_ion={1.0: (np.array([0.0, 1.0]), np.array([4.0, 2.0]))},
    )
    assert output.values("u_ion", np.array([0.5])) == pytest.approx([5.0])
    assert output.values("j_ion", np.array([0.25]), radius=1.0) == pytest.approx([3.5])
    with pytest.raises(KeyError):
        output.values("j_ion", np.array([0.25]), radius=2.0)
    with pytest.raises(KeyError):
        output.scalar("u_ion")


@pytest.mark.slow
def test_full_evaluation(cheap_model, theta, condition):
    request = OutputRequest().with_sweep(1.0, np.radians(np.arange(0, 91, 5)))
    output = cheap_model.evaluate(theta, condition, request)
    assert 0.0 < output.thrust_corrected < output.thrust_uncorrected
    assert output.I_B < output.I_D
    assert output.values("j_ion", np.array([0.0]), radius=1.0)[0] > 0.0
    assert output.u_ion.shape == output.z.shape


def test_degenerate_barrier_fails_before_solving(model, theta, condition):
    results = model.evaluate_many(
        [(theta.replace(L_anom=0.0), condition)], OutputRequest.only("I_D")
    )
    assert isinstance(results[0], DegenerateWidthError)


def test_negative_beam_current_is_a_failed_evaluation(
    model, theta, condition, monkeypatch
):
    def backflow(*args, **kwargs):
        return SimpleNamespace(
            thrust_uncorrected=0.0,
            discharge_current=4.0,
            ion_beam_current=-0.1,
            z=np.linspace(0.0, 0.075, 5),
            ion_velocity=np.zeros(5),
        )

    monkeypatch.setattr("hallcal.system.solve_discharge", backflow)
    with pytest.raises(DomainError, match="negative current"):
        model.evaluate(theta, condition, OutputRequest.only("I_D"))
    results = model.evaluate_many([(theta, condition)], OutputRequest.only("T_c"))
    assert isinstance(results[0], DomainError)


def test_nu_anom_is_inverse_hall_over_bohm(model, theta, condition, monkeypatch):
    z = np.linspace(0.0, 0.05, 11)
    inverse_hall = np.full(11, 1.0 / 32.0)

    def discharge(*args, **kwargs):
        return SimpleNamespace(
            thrust_uncorrected=0.08,
            discharge_current=4.0,
            ion_beam_current=3.0,
            z=z,
            ion_velocity=np.zeros(11),
            extra_columns={"inverse_hall": inverse_hall},
        )

    monkeypatch.setattr("hallcal.system.solve_discharge", discharge)
    output = model.evaluate(theta, condition, OutputRequest.only("nu_anom"))
    assert output.nu_anom == pytest.approx(np.full(11, 0.5))
    assert output.values("nu_anom", np.array([0.0125])) == pytest.approx([0.5])
    assert output.V_cc == pytest.approx(
        coupling_voltage(CathodeParams.from_parameters(theta), condition.background_pressure)
    )


def test_nu_anom_not_requested():
    with pytest.raises(KeyError, match="not requested"):
        SystemOutput(V_cc=30.0).values("nu_anom", np.array([0.0]))


def test_nu_anom_bands_across_pressures(model, theta, condition, monkeypatch):
    z = np.linspace(0.0, 2.0 * model.geometry.channel_length, 201)

    def discharge(geometry, field, propellant, params, cond, *args, **kwargs):
        return SimpleNamespace(
            thrust_uncorrected=0.08,
            discharge_current=4.0,
            ion_beam_current=3.0,
            z=z,
            ion_velocity=np.zeros_like(z),
            extra_columns={
                "inverse_hall": anomalous_inverse_hall(
                    params.anom, z / geometry.channel_length, cond.background_pressure
                )
            },
        )

    monkeypatch.setattr("hallcal.system.solve_discharge", discharge)
    alphas = np.linspace(0.03, 0.1, 200)
    base = theta.to_vector()
    rows = np.tile(base, (len(alphas), 1))
    rows[:, PARAMETER_NAMES.index("alpha_anom")] = alphas
    chain = Chain(
        names=PARAMETER_NAMES,
        samples=rows,
        log_posterior=np.zeros(len(rows)),
        accepted=np.zeros(len(rows), dtype=bool),
        stage=np.zeros(len(rows), dtype=int),
        burn_in_fraction=0.0,
    )
    targets = profile_targets(condition, (5.0, 25.0, 50.0))
    ensemble = posterior_predict(model, chain, targets, N=400, seed=0)

    troughs = []
    for prediction in ensemble.predictions:
        assert prediction.target.qoi == "nu_anom"
        assert list(prediction.columns()) == ["z", "q5", "q50", "q95"]
        assert np.array_equal(prediction.coords, z)
        assert np.all(prediction.q5 <= prediction.q50)
        assert np.all(prediction.q50 <= prediction.q95)
        assert np.all(prediction.q5 >= 16.0 * 0.03 * (1.0 - theta.beta_anom) - 1e-12)
        assert np.all(prediction.q95 <= 16.0 * 0.1 + 1e-12)
        troughs.append(z[np.argmin(prediction.q50)])
    assert troughs[0] > troughs[1] > troughs[2]
