"""The univariate Gaussian family and the self-dual quadratic model.

Natural coordinates of N(mu, sigma^2):

    eta   = (mu, mu^2 + sigma^2)
    theta = (mu / sigma^2, -1 / (2 sigma^2))

with ``psi_star(eta) = -1/2 ln(eta2 - eta1^2)`` (the negative entropy up to
a constant) and its conjugate ``psi(theta) = -theta1^2 / (4 theta2)
- 1/2 ln(-2 theta2) - 1/2``. The closed-form matrices below are kept as
reference oracles for the jet-derived ones.
"""

from __future__ import annotations

import math

import numpy as np

from ..diffcalc import PotentialModel, log, sqrt
from ..errors import DomainError
from ..dually_flat import ETA, THETA, DuallyFlatModel, ParamChart
from ..flows import GaugeField
from ..tensor import MetricField

__all__ = [
    "C_STAR",
    "C_STAR_DEFORMED",
    "fisher_metric",
    "gaussian_eta",
    "gaussian_gauge",
    "gaussian_hessian_metric",
    "gaussian_inverse_metric_derivatives",
    "gaussian_inverse_metric_eta",
    "gaussian_metric_eta",
    "gaussian_model",
    "gaussian_theta",
    "quadratic_model",
]

C_STAR = 1.0 / math.sqrt(2.0)
C_STAR_DEFORMED = math.sqrt(1.5)


def _psi_star(e):
    return -0.5 * log(e[1] - e[0] ** 2)


def _psi(t):
    return -(t[0] ** 2) / (4.0 * t[1]) - 0.5 * log(-2.0 * t[1]) - 0.5


def _eta_domain(e) -> str | None:
    if e[1] - e[0] ** 2 <= 0.0:
        return "eta2 must exceed eta1^2 (sigma > 0)"
    return None


def _to_eta(p):
    mu, sigma = p
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {float(sigma)}", 1)
    return (mu, mu**2 + sigma**2)


def _from_eta(e):
    return (e[0], sqrt(e[1] - e[0] ** 2))


def gaussian_eta(mu: float, sigma: float) -> np.ndarray:
    return np.array([mu, mu * mu + sigma * sigma])


def gaussian_theta(mu: float, sigma: float) -> np.ndarray:
    s2 = sigma * sigma
    return np.array([mu / s2, -0.5 / s2])


def _theta_guess(eta: np.ndarray) -> np.ndarray:
    mu = eta[0]
    s2 = eta[1] - mu * mu
    return np.array([mu / s2, -0.5 / s2])


def _eta_guess(theta: np.ndarray) -> np.ndarray:
    s2 = -0.5 / theta[1]
    mu = theta[0] * s2
    return np.array([mu, mu * mu + s2])


def gaussian_model() -> DuallyFlatModel:
    """Gaussian model with closed-form potentials on both charts."""
    psi = PotentialModel(
        _psi,
        ("theta1", "theta2"),
        THETA,
        lower=(-math.inf, -math.inf),
        upper=(math.inf, 0.0),
        name="gaussian_psi",
    )
    psi_star = PotentialModel(
        _psi_star,
        ("eta1", "eta2"),
        ETA,
        lower=(-math.inf, 0.0),
        upper=(math.inf, math.inf),
        constraint=_eta_domain,
        name="gaussian_psi_star",
    )
    return DuallyFlatModel(
        name="gaussian",
        n=2,
        psi=psi,
        psi_star=psi_star,
        eta_guess=_eta_guess,
        theta_guess=_theta_guess,
        params=ParamChart(("mu", "sigma"), _to_eta, _from_eta),
    )


def gaussian_metric_eta(mu: float, sigma: float) -> np.ndarray:
    """Hessian of psi_star at (mu, sigma)."""
    s2 = sigma * sigma
    return np.array([[2 * mu * mu + s2, -mu], [-mu, 0.5]]) / (s2 * s2)


def gaussian_inverse_metric_eta(mu: float, sigma: float) -> np.ndarray:
    """Inverse of :func:`gaussian_metric_eta`, the Hessian of psi at the dual point."""
    s2 = sigma * sigma
    return s2 * np.array([[1.0, 2 * mu], [2 * mu, 2 * (s2 + 2 * mu * mu)]])


def gaussian_inverse_metric_derivatives(mu: float, sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Derivatives of :func:`gaussian_inverse_metric_eta` along eta1 and eta2.

    The inverse metric is (eta2 - eta1^2) [[1, 2 eta1], [2 eta1, 2 (eta2 + eta1^2)]],
    so its (2, 2) entry is 2 (eta2^2 - eta1^4) with eta2-derivative
    +4 (mu^2 + sigma^2).
    """
    s2 = sigma * sigma
    d1 = np.array(
        [[-2 * mu, 2 * s2 - 4 * mu * mu], [2 * s2 - 4 * mu * mu, -8 * mu**3]]
    )
    d2 = np.array([[1.0, 2 * mu], [2 * mu, 4 * (s2 + mu * mu)]])
    return d1, d2


def gaussian_gauge() -> GaugeField:
    """The gauge A* = (1/sigma, 0) on the eta chart."""

    def a_star(e):
        return (1.0 / sqrt(e[1] - e[0] ** 2), 0.0)

    return GaugeField(a_star, ETA, 2, name="gaussian_inv_sigma")


def _fisher(x):
    s2 = x[1] ** 2
    return [[1.0 / s2, 0.0], [0.0, 2.0 / s2]]


def fisher_metric() -> MetricField:
    """Closed-form Fisher metric (d mu^2 + 2 d sigma^2) / sigma^2 on (mu, sigma)."""
    return MetricField.closed_form(
        _fisher,
        ("mu", "sigma"),
        (-2.0, 0.0),
        (2.0, 3.0),
        chart="(mu,sigma)",
        name="gaussian_fisher",
    )


def gaussian_hessian_metric() -> MetricField:
    """Hessian of psi_star on the eta chart (the same geometry as :func:`fisher_metric`)."""
    model = gaussian_model()
    return MetricField.from_potential(
        model.psi_star, (-2.0, 0.0), (2.0, 13.0), name="gaussian_hessian"
    )


def quadratic_model(n: int = 2) -> DuallyFlatModel:
    """Self-dual model psi = |theta|^2 / 2, for which eta = theta."""

    def half_square(x):
        total = 0.0
        for v in x:
            total = total + 0.5 * v * v
        return total

    names_t = tuple(f"theta{i + 1}" for i in range(n))
    names_e = tuple(f"eta{i + 1}" for i in range(n))
    psi = PotentialModel(half_square, names_t, THETA, name="quadratic_psi")
    psi_star = PotentialModel(half_square, names_e, ETA, name="quadratic_psi_star")
    return DuallyFlatModel(
        name="quadratic",
        n=n,
        psi=psi,
        psi_star=psi_star,
        eta_guess=lambda t: np.array(t, dtype=float),
        theta_guess=lambda e: np.array(e, dtype=float),
        params=ParamChart(
            tuple(f"x{i + 1}" for i in range(n)),
            lambda p: tuple(p),
            lambda e: tuple(e),
        ),
    )
