"""Closed-form results for single-mode Gaussian states.

Everything in this module is analytic: covariance matrices, quantum Fisher
information, and linear/echo sensitivities for displaced squeezed thermal
states.  The expressions serve as independent cross-checks for the numerical
pipeline (a Kerr-free drive prepares exactly such a state) and as baselines
for the scaling study.

Convention: the squeezing operator is S = exp((xi* a^2 - xi a^dag^2)/2) with
xi = r e^{i zeta}, so zeta = pi/2 squeezes the quadrature at theta = pi/4.
The free evolution under H = epsilon (a^dag^2 + a^2) maps onto r = 2*epsilon*t
with zeta = pi/2 (direction fixed by matching the minimum variance).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "GaussianState",
    "NoisySensitivities",
    "chi_linear",
    "chi_linear_max",
    "covariance",
    "from_free_squeezing",
    "mai_gaussian",
    "noisy_sensitivities",
    "purity",
    "qfi_displacement",
    "qfi_max",
    "qfi_vs_excitations",
    "variance",
]


@dataclass(frozen=True)
class GaussianState:
    """Displaced squeezed thermal state.

    Parameters
    ----------
    alpha:
        Coherent displacement.  Does not enter any covariance-based
        quantity; kept so a state is fully specified.
    r:
        Squeezing magnitude, r >= 0.
    zeta:
        Squeezing phase in radians.
    n_thermal:
        Thermal occupation of the pre-squeezing state, >= 0.
    """

    alpha: complex = 0.0
    r: float = 0.0
    zeta: float = 0.0
    n_thermal: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.r) or self.r < 0.0:
            raise ValueError(f"squeezing magnitude must be finite and >= 0, got {self.r}")
        if not math.isfinite(self.zeta):
            raise ValueError("squeezing phase must be finite")
        if not math.isfinite(self.n_thermal) or self.n_thermal < 0.0:
            raise ValueError(
                f"thermal occupation must be finite and >= 0, got {self.n_thermal}"
            )


def from_free_squeezing(epsilon: float, t: float) -> GaussianState:
    """Gaussian state produced by H = epsilon(a^dag^2 + a^2) acting on vacuum.

    The mapping is r = 2*epsilon*t, zeta = pi/2: the variance along
    theta = pi/4 is e^{-4 epsilon t}/2.
    """
    r = 2.0 * epsilon * t
    if r < 0.0:
        raise ValueError("epsilon*t must be >= 0 for the squeezed-vacuum mapping")
    return GaussianState(r=r, zeta=math.pi / 2.0)


def _width(g: GaussianState) -> float:
    # (1 + 2 n_T)/2, the symplectic eigenvalue of the covariance matrix.
    return 0.5 * (1.0 + 2.0 * g.n_thermal)


def covariance(g: GaussianState) -> np.ndarray:
    """2x2 covariance matrix of (X, P); det = ((1+2n_T)/2)^2 for any r, zeta."""
    c2r = math.cosh(2.0 * g.r)
    s2r = math.sinh(2.0 * g.r)
    cz = math.cos(g.zeta)
    sz = math.sin(g.zeta)
    return _width(g) * np.array(
        [[c2r - s2r * cz, -s2r * sz], [-s2r * sz, c2r + s2r * cz]]
    )


def variance(g: GaussianState, theta: float) -> float:
    """Variance of the rotated quadrature cos(theta) X + sin(theta) P."""
    return _width(g) * (
        math.cosh(2.0 * g.r) - math.sinh(2.0 * g.r) * math.cos(g.zeta - 2.0 * theta)
    )


def purity(g: GaussianState) -> float:
    """Tr rho^2 = 1/(1 + 2 n_T); independent of displacement and squeezing."""
    return 1.0 / (1.0 + 2.0 * g.n_thermal)


def qfi_displacement(g: GaussianState, phi: float) -> float:
    """QFI for a displacement generated by cos(phi) X + sin(phi) P."""
    return (
        2.0
        * (math.cosh(2.0 * g.r) - math.sinh(2.0 * g.r) * math.cos(g.zeta - 2.0 * phi))
        / (1.0 + 2.0 * g.n_thermal)
    )


def qfi_max(g: GaussianState) -> float:
    """Maximum of qfi_displacement over phi: 2 e^{2r}/(1+2n_T) at phi = zeta/2 - pi/2."""
    return 2.0 * math.exp(2.0 * g.r) / (1.0 + 2.0 * g.n_thermal)


def chi_linear(g: GaussianState, theta: float, phi: float) -> float:
    """Inverse sensitivity of the quadrature M(theta) to displacements along phi.

    chi^-2 = |<[G(phi), M(theta)]>|^2 / Var[M(theta)]
           = 2 sin^2(theta - phi)
             / ((1+2n_T)(cosh 2r - cos(zeta - 2 theta) sinh 2r)).
    """
    num = math.sin(theta - phi) ** 2
    return num / variance(g, theta)


def chi_linear_max(g: GaussianState) -> float:
    """Best linear sensitivity: theta = zeta/2, phi = theta - pi/2.

    Equals qfi_max exactly: a homodyne readout saturates the quantum
    Cramer-Rao bound for Gaussian displacement sensing.
    """
    return chi_linear(g, g.zeta / 2.0, g.zeta / 2.0 - math.pi / 2.0)


def mai_gaussian(g: GaussianState) -> float:
    """Echo (measurement-after-interaction) sensitivity, noiseless readout.

    For Gaussian dynamics the echo buys nothing: the value equals the linear
    optimum 2 e^{2r}/(1+2n_T).
    """
    return 2.0 * math.exp(2.0 * g.r) / (1.0 + 2.0 * g.n_thermal)


class NoisySensitivities(NamedTuple):
    chi: float
    chi_mai: float
    ratio: float


def noisy_sensitivities(g: GaussianState, sigma2: float) -> NoisySensitivities:
    """Linear and echo sensitivities with detection noise sigma^2 added to Var[M].

    chi^-2     = 1 / ((1+2n_T) e^{-2r}/2 + sigma^2)
    chi^-2_MAI = e^{2r} / ((1+2n_T)/2 + sigma^2)
    ratio      = (1 + 2n_T + 2 e^{2r} sigma^2) / (1 + 2n_T + 2 sigma^2) >= 1

    The echo converts squeezing into signal gain before the noisy readout,
    which is why the ratio exceeds one as soon as r > 0 and sigma^2 > 0.
    """
    if sigma2 < 0.0:
        raise ValueError(f"detection noise variance must be >= 0, got {sigma2}")
    w = _width(g)
    chi = 1.0 / (w * math.exp(-2.0 * g.r) + sigma2)
    chi_mai = math.exp(2.0 * g.r) / (w + sigma2)
    return NoisySensitivities(chi=chi, chi_mai=chi_mai, ratio=chi_mai / chi)


def qfi_vs_excitations(n_mean: float) -> float:
    """QFI of squeezed vacuum as a function of its mean photon number N.

    F_Q = 2 (1 + 2N + 2 sqrt(N(N+1))), the N = sinh^2 r parametrization of
    2 e^{2r}.  Asymptote 4 + 8N; the Kerr-limited scaling slopes are compared
    against this ceiling.
    """
    if n_mean < 0.0:
        raise ValueError(f"mean excitation number must be >= 0, got {n_mean}")
    return 2.0 * (1.0 + 2.0 * n_mean + 2.0 * math.sqrt(n_mean * (n_mean + 1.0)))
