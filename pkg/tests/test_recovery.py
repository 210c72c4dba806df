import numpy as np
import pytest

from hallcal.datasets import synthesize_dataset
from hallcal.inference import DramConfig, LikelihoodConfig, calibrate
from hallcal.params import OperatingCondition, PriorCollection
from hallcal.system import OutputRequest
from hallcal.uq import default_targets, posterior_predict


pytestmark = pytest.mark.recovery


def _conditions(pressures):
    return [
        OperatingCondition.from_units(300.0, p, 5.0, pressure_unit="uTorr")
        for p in pressures
    ]


def test_cathode_parameters_are_recovered(model, theta):
    training = synthesize_dataset(
        model,
        theta,
        _conditions([0.5, 2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 120.0]),
        0.5,
        seed=12,
        qois=["V_cc"],
        name="recovery",
    )
    cfg = DramConfig(n_samples=20_000, seed=12)
    chain = calibrate(
        model, [training], PriorCollection(), LikelihoodConfig(targets={"V_cc": 0.005}), cfg
    )
    kept = chain.post_burn_in
    for name in ("V_vac", "T_ec", "P_T", "P_star"):
        column = kept[:, chain.names.index(name)]
        low, high = np.percentile(column, [1, 99])
        assert low <= getattr(theta, name) <= high, name

    (held_out,) = _conditions([60.0])
    ensemble = posterior_predict(
        model, chain, default_targets([held_out], ["V_cc"]), N=500, seed=1
    )
    truth = model.evaluate(theta, held_out, OutputRequest.only("V_cc")).V_cc
    assert ensemble.predictions[0].q50[0] == pytest.approx(truth, rel=0.02)
