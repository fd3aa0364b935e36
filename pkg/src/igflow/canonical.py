"""The canonical transformation generated by G = eta_i theta^i.

The map sends (theta, eta) to (theta_hat, eta_hat) = (eta, -theta), with
the new potential pair xi(theta_hat) = -psi_star(eta) and
xi_star(eta_hat) = -psi(theta). Under it the ascent flow on the theta chart
(d eta/dt = eta) becomes the descent law d theta_hat/dt* = -theta_hat in
the reversed parameter t* = -t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffcalc import Point, central_differences
from .dually_flat import ETA, THETA, DuallyFlatModel, eta_from_theta, potential_jets
from .errors import DomainError, FlowError
from .flows import Trajectory
from .tensor import fd_along, uniform_step

__all__ = [
    "THETA_HAT",
    "ETA_HAT",
    "CanonicalImage",
    "canonical_map",
    "canonical_swap",
    "dual_flow_residual",
    "generating_residual",
]

THETA_HAT = "theta_hat"
ETA_HAT = "eta_hat"
GENERATING_DIRECTIONS = 5


@dataclass(frozen=True)
class CanonicalImage:
    """Image of a point under the canonical map, with the new potentials."""

    theta_hat: Point
    eta_hat: Point
    xi: float
    xi_star: float

    @property
    def mirror_residual(self) -> float:
        """``|xi + xi_star - eta_hat . theta_hat|``."""
        pairing = float(np.dot(self.eta_hat.coords, self.theta_hat.coords))
        return abs(self.xi + self.xi_star - pairing)


def canonical_swap(theta, eta) -> tuple[np.ndarray, np.ndarray]:
    """The coordinate part of the map: (theta, eta) -> (eta, -theta)."""
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if theta.shape != eta.shape:
        raise ValueError(f"shape mismatch {theta.shape} vs {eta.shape}")
    return eta.copy(), -theta


def canonical_map(m: DuallyFlatModel, theta: Point) -> CanonicalImage:
    """Map a theta-chart point and evaluate the new potential pair there."""
    eta = eta_from_theta(m, theta)
    psi = potential_jets(m, theta, 1).value
    psi_star = potential_jets(m, eta, 1).value
    th_hat, et_hat = canonical_swap(theta.coords, eta.coords)
    return CanonicalImage(
        theta_hat=Point(th_hat, THETA_HAT),
        eta_hat=Point(et_hat, ETA_HAT),
        xi=-psi_star,
        xi_star=-psi,
    )


def dual_flow_residual(m: DuallyFlatModel, traj: Trajectory) -> float:
    """``max |d theta_hat/dt* + theta_hat|`` along the mapped ascent flow.

    ``theta_hat`` is the eta series of the trajectory and ``t* = -t``, so
    ``d/dt* = -d/dt``. Derivatives are five-point differences on the stored
    uniform step, evaluated at the interior samples.
    """
    if traj.spec.model is not m:
        if traj.spec.model.name != m.name:
            raise ValueError(f"trajectory belongs to {traj.spec.model.name!r}, not {m.name!r}")
    if traj.spec.chart != THETA or traj.spec.deformed:
        raise FlowError("dual_flow_residual needs an undeformed theta-chart (ascent) flow")
    if traj.parameter != "t":
        raise FlowError("dual_flow_residual needs a trajectory in the flow parameter t")
    if len(traj) < 5:
        raise FlowError(f"trajectory too short: {len(traj)} samples, need at least 5")
    theta_hat = traj.chart_series(ETA)
    h = uniform_step(traj.params)
    d_dt, _ = fd_along(theta_hat, h)
    d_dtstar = -d_dt
    return float(np.max(np.abs(d_dtstar + theta_hat[2:-2])))


def generating_residual(m: DuallyFlatModel, theta: Point, seed: int = 42) -> float:
    """Check d xi = d psi - dG along random directions.

    For each of five seeded unit directions u, the directional derivative
    of ``theta -> xi(theta_hat(theta))`` is taken by central differences and
    compared with ``(grad psi - grad G) . u`` where ``grad G = eta + H theta``.
    Points too close to the boundary for the stencil are rejected.
    """
    if not isinstance(theta, Point) or theta.chart != THETA:
        raise ValueError("generating_residual expects a theta-chart Point")
    th = m.check(theta)
    jets = potential_jets(m, theta, 2)
    grad_psi = jets.grad
    grad_g = grad_psi + jets.hess @ th
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(GENERATING_DIRECTIONS):
        u = rng.normal(size=th.size)
        u /= np.linalg.norm(u)

        def along(s, u=u):
            p = Point(th + float(s[0]) * u, THETA)
            return -potential_jets(m, eta_from_theta(m, p), 1).value

        def check(s, u=u):
            m.check(Point(th + float(s[0]) * u, THETA))

        try:
            slope = central_differences(along, [0.0], 1, check=check, extended=False)[0]
        except DomainError as exc:
            raise DomainError(f"too close to the boundary for the generating check: {exc}") from exc
        worst = max(worst, abs(float(slope) - float((grad_psi - grad_g) @ u)))
    return worst
