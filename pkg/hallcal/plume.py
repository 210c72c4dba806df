"""
Semi-empirical far-field plume model.

The beam current splits into three populations: an un-scattered main beam, a
scattered beam and charge-exchange (CEX) ions. The CEX share grows with the
background neutral density along the path, exp(-n_n sigma r) of the beam
survives. The survivors split c0 : (1 - c0) between two Gaussians in angle,
the CEX ions are spread uniformly over the downstream hemisphere.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Self

import numpy as np
from scipy import integrate

from .errors import DomainError, PlumeRangeError, UndefinedDivergenceError
from .params import ParameterSet


CEX_CROSS_SECTION = 5.5e-19  # m^2, Xe+ on Xe
ANGLE_TOLERANCE = 1e-6  # rad
HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class PlumeParams:
    c0: float  # main to scattered current ratio
    c1: float  # main to scattered divergence ratio
    c2: float  # rad/Pa
    c3: float  # rad
    c4: float  # m^-3/Pa
    c5: float  # m^-3
    cex_cross_section: float = CEX_CROSS_SECTION

    def __post_init__(self) -> None:
        if not 0.0 <= self.c0 <= 1.0:
            raise DomainError(f"c0 must lie in [0, 1], got {self.c0}")
        if self.c1 <= 0.0:
            raise DomainError(f"c1 must be positive, got {self.c1}")
        if self.cex_cross_section < 0.0:
            raise DomainError("CEX cross section must be nonnegative")

    @classmethod
    def from_parameters(
        cls, theta: ParameterSet, cex_cross_section: float = CEX_CROSS_SECTION
    ) -> Self:
        return cls(
            c0=theta.c0,
            c1=theta.c1,
            c2=theta.c2,
            c3=theta.c3,
            c4=theta.c4,
            c5=theta.c5,
            cex_cross_section=cex_cross_section,
        )


def background_neutral_density(P_B: float, params: PlumeParams) -> float:
    if P_B < 0.0:
        raise DomainError("Background pressure must be nonnegative")
    return params.c4 * P_B + params.c5


def divergence_angle(
    P_B: float, params: PlumeParams, tolerance: float = ANGLE_TOLERANCE
) -> float:
    """Scattered-beam divergence angle c2 P_B + c3, clamped into (0, pi/2)."""
    theta = params.c2 * P_B + params.c3
    if theta <= 0.0:
        if theta < -tolerance:
            raise PlumeRangeError(
                f"Divergence angle {theta:.6g} rad at P_B={P_B:.6g} Pa is not positive"
            )
        return tolerance
    if theta >= HALF_PI:
        if theta > HALF_PI + tolerance:
            raise PlumeRangeError(
                f"Divergence angle {theta:.6g} rad at P_B={P_B:.6g} Pa exceeds pi/2"
            )
        return HALF_PI - tolerance
    return theta


@lru_cache(maxsize=1024)
def population_normalizer(width: float) -> float:
    """2 pi times the hemispherical integral of exp(-(phi/width)^2) sin(phi)."""
    if width <= 0.0:
        raise DomainError(f"Population width must be positive, got {width}")
    value, _ = integrate.quad(
        lambda phi: np.exp(-((phi / width) ** 2)) * np.sin(phi),
        0.0,
        HALF_PI,
        points=(min(3.0 * width, 0.5 * HALF_PI),),
        epsabs=0.0,
        epsrel=1e-12,
        limit=200,
    )
    return 2.0 * np.pi * value


def cex_survival(r: float, P_B: float, params: PlumeParams) -> float:
    return float(
        np.exp(-background_neutral_density(P_B, params) * params.cex_cross_section * r)
    )


def current_density(
    r: float,
    phi: float | np.ndarray,
    I_B: float,
    P_B: float,
    params: PlumeParams,
    tolerance: float = ANGLE_TOLERANCE,
) -> float | np.ndarray:
    """Ion current density (A/m^2) at distance r and angle phi off the thruster axis."""
    if r <= 0.0:
        raise DomainError(f"Radius must be positive, got {r}")
    phi = np.asarray(phi, dtype=float)
    if np.any(phi < -tolerance) or np.any(phi > HALF_PI + tolerance):
        raise DomainError("Angles must lie in [0, pi/2]")

    theta_scatter = divergence_angle(P_B, params, tolerance)
    theta_main = params.c1 * theta_scatter
    survival = cex_survival(r, P_B, params)
    I_main = params.c0 * survival * I_B
    I_scatter = (1.0 - params.c0) * survival * I_B
    I_cex = (1.0 - survival) * I_B

    r2 = r * r
    j = (
        I_main / (r2 * population_normalizer(theta_main))
        * np.exp(-((phi / theta_main) ** 2))
        + I_scatter / (r2 * population_normalizer(theta_scatter))
        * np.exp(-((phi / theta_scatter) ** 2))
        + I_cex / (2.0 * np.pi * r2)
    )
    return float(j) if j.ndim == 0 else j


def hemispherical_current(j: Callable[[float], float], r: float) -> float:
    value, _ = integrate.quad(
        lambda phi: j(phi) * np.sin(phi), 0.0, HALF_PI, epsabs=0.0, epsrel=1e-10, limit=200
    )
    return 2.0 * np.pi * r * r * value


def effective_divergence(j: Callable[[float], float], r: float) -> float:
    """
    Effective divergence angle phi_d of an angular current profile at radius r,
    from cos(phi_d) = I_Bz / I_B over the downstream hemisphere.
    """
    total = hemispherical_current(j, r)
    if not total > 0.0:
        raise UndefinedDivergenceError(
            f"Beam current through the hemisphere at r={r} m is {total:.3g} A"
        )
    axial = hemispherical_current(lambda phi: j(phi) * np.cos(phi), r)
    return float(np.arccos(np.clip(axial / total, -1.0, 1.0)))


def effective_divergence_from_samples(phi: np.ndarray, j: np.ndarray) -> float:
    """Same as effective_divergence for a tabulated profile, by the trapezoid rule."""
    phi = np.asarray(phi, dtype=float)
    j = np.asarray(j, dtype=float)
    weights = j * np.sin(phi)
    total = integrate.trapezoid(weights, phi)
    if not total > 0.0:
        raise UndefinedDivergenceError("Tabulated beam current is not positive")
    axial = integrate.trapezoid(weights * np.cos(phi), phi)
    return float(np.arccos(np.clip(axial / total, -1.0, 1.0)))


def plume_divergence(
    P_B: float,
    params: PlumeParams,
    r: float = 1.0,
    tolerance: float = ANGLE_TOLERANCE,
) -> float:
    """Divergence angle of the modeled plume. It does not depend on the beam current."""
    return effective_divergence(
        lambda phi: current_density(r, phi, 1.0, P_B, params, tolerance), r
    )


def corrected_thrust(T: float, phi_d: float) -> float:
    if not 0.0 <= phi_d < HALF_PI:
        raise DomainError(f"Divergence angle must lie in [0, pi/2), got {phi_d}")
    return T * np.cos(phi_d)


def angular_sweep(
    r: float,
    phi: np.ndarray,
    I_B: float,
    P_B: float,
    params: PlumeParams,
    tolerance: float = ANGLE_TOLERANCE,
) -> dict[str, np.ndarray]:
    phi = np.asarray(phi, dtype=float)
    return {
        "phi_deg": np.degrees(phi),
        "j": np.atleast_1d(current_density(r, phi, I_B, P_B, params, tolerance)),
    }
