from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import pytest

from hallcal.errors import HallcalError
from hallcal.params import OperatingCondition, ParameterSet
from hallcal.propellant import load_propellant
from hallcal.system import SCALAR_QOIS, SystemModel
from hallcal.thruster import MagneticProfile, SolverSettings, ThrusterGeometry
from hallcal.utils import to_si


DATA = Path(__file__).parent.parent / "hallcal" / "data"


@pytest.fixture
def theta() -> ParameterSet:
    return ParameterSet(
        T_ec=2.5,
        V_vac=30.0,
        P_T=to_si(50.0, "uTorr"),
        P_star=to_si(100.0, "uTorr"),
        alpha_anom=0.0625,
        beta_anom=0.9,
        z_anom=1.0,
        L_anom=0.2,
        dz_anom=0.2,
        u_n=300.0,
        c_w=1.0,
        f_n=5.0,
        c0=0.5,
        c1=0.5,
        c2=10.0,
        c3=0.3,
        c4=2.4e20,
        c5=1e16,
    )


@pytest.fixture
def condition() -> OperatingCondition:
    return OperatingCondition.from_units(300.0, 5.0, 5.0, pressure_unit="uTorr")


@pytest.fixture
def geometry() -> ThrusterGeometry:
    return ThrusterGeometry(
        channel_length=0.025, inner_radius=0.0345, outer_radius=0.05
    )


@pytest.fixture
def field() -> MagneticProfile:
    return MagneticProfile(
        B_max=0.015, z_peak=0.025, width_upstream=0.0156, width_downstream=0.0255
    )


@pytest.fixture
def xenon():
    return load_propellant("xenon")


@pytest.fixture
def model(geometry, field, xenon) -> SystemModel:
    return SystemModel(geometry, field, xenon, SolverSettings())


@pytest.fixture
def cheap_model(model) -> SystemModel:
    return model.with_settings(model.settings.cheapened())


@dataclass
class LinearOutput:
    """Output of the linear toy model: every QoI equals a . theta + b . d."""

    value: float
    z: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 5))

    def values(
        self,
        qoi: str,
        coords: Optional[np.ndarray] = None,
        radius: Optional[float] = None,
    ) -> np.ndarray:
        if qoi in SCALAR_QOIS:
            return np.array([self.value])
        grid = self.z if coords is None else np.asarray(coords, dtype=float)
        return self.value * (1.0 + grid)


class LinearModel:
    """y = a . theta + b . (V_d, P_B in uTorr, m_a in mg/s)."""

    def __init__(self, a, b=(0.0, 0.0, 0.0), fail_when=None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.fail_when = fail_when
        self.calls = 0

    def _one(self, theta, condition):
        self.calls += 1
        theta = np.asarray(theta, dtype=float)
        if self.fail_when is not None and self.fail_when(theta):
            return HallcalError("toy failure")
        d = np.array(
            [
                condition.discharge_voltage,
                condition.background_pressure_torr * 1e6,
                condition.anode_mass_flow * 1e6,
            ]
        )
        return LinearOutput(float(self.a @ theta + self.b @ d))

    def evaluate_many(self, points, requests=None):
        return [self._one(theta, condition) for theta, condition in points]


@pytest.fixture
def linear_model():
    return LinearModel
