from dataclasses import dataclass
from typing import Self

import numpy as np

from .errors import DomainError
from .params import ParameterSet


@dataclass(frozen=True)
class CathodeParams:
    V_vac: float  # V
    T_ec: float  # eV
    P_T: float  # Pa
    P_star: float  # Pa

    @classmethod
    def from_parameters(cls, theta: ParameterSet) -> Self:
        return cls(V_vac=theta.V_vac, T_ec=theta.T_ec, P_T=theta.P_T, P_star=theta.P_star)


def coupling_voltage(p: CathodeParams, P_B: float | np.ndarray) -> float | np.ndarray:
    """
    Cathode coupling voltage at background pressure P_B (Pa).

    V_cc = V_vac + T_ec ln(1 + P_B/P_T) - T_ec P_B / (P_T + P*)

    The natural logarithm is used. The curve rises from V_vac and turns over
    at P_B = P*.
    """
    if p.P_T <= 0.0 or p.P_T + p.P_star <= 0.0:
        raise DomainError(
            f"Cathode pressures must be positive, got P_T={p.P_T!r}, P*={p.P_star!r}"
        )
    P_B = np.asarray(P_B, dtype=float)
    if np.any(P_B < 0.0):
        raise DomainError("Background pressure must be nonnegative")
    v = p.V_vac + p.T_ec * np.log1p(P_B / p.P_T) - p.T_ec * P_B / (p.P_T + p.P_star)
    return float(v) if v.ndim == 0 else v
