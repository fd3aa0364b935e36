"""Dual coordinates, dual potentials and the Legendre transform.

A :class:`DuallyFlatModel` pairs a potential ``psi`` on the theta chart with
``psi_star`` on the eta chart, linked by ``eta = grad psi(theta)`` and
``theta = grad psi_star(eta)``. Either side may be missing, in which case it
is the numeric conjugate: the dual point is found by damped Newton on the
gradient map of the other side, and its jets follow from the inverse
function theorem.

Convention: the Hessian of ``psi_star`` is the inverse of the Hessian of
``psi`` at corresponding points. It is the matrix written g*^{ij} in the
Gaussian example, and ``metric_at`` returns it for points in the eta chart.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .diffcalc import Jet, Point, PotentialModel, _symmetric_third, taylor
from .errors import ChartError, ConvergenceError, DomainError, SingularMetricError

__all__ = [
    "THETA",
    "ETA",
    "DuallyFlatModel",
    "ParamChart",
    "PotentialJets",
    "duality_residual",
    "eta_from_theta",
    "legendre_residual",
    "metric_at",
    "newton_solve",
    "potential_jets",
    "theta_from_eta",
    "to_chart",
]

THETA = "theta"
ETA = "eta"
NEWTON_MAXITER = 100
NEWTON_TOL = 1e-13


def other_chart(chart: str) -> str:
    if chart == THETA:
        return ETA
    if chart == ETA:
        return THETA
    raise ChartError(f"chart must be {THETA!r} or {ETA!r}, got {chart!r}")


@dataclass(frozen=True)
class ParamChart:
    """Human-facing parameters (e.g. mean and standard deviation) of a model.

    ``to_eta`` and ``from_eta`` convert between the parameters and the eta
    chart; both must accept jets so parameter velocities can be derived.
    """

    names: tuple[str, ...]
    to_eta: Callable[[Sequence], Sequence]
    from_eta: Callable[[Sequence], Sequence]

    def eta(self, params) -> np.ndarray:
        return np.array([float(v) for v in self.to_eta(tuple(np.asarray(params, float)))])

    def params(self, eta) -> np.ndarray:
        return np.array([float(v) for v in self.from_eta(tuple(np.asarray(eta, float)))])

    def jacobian(self, eta) -> np.ndarray:
        """d(params)/d(eta) at ``eta``."""
        out = self.from_eta(Jet.variables(np.asarray(eta, float), 1))
        return np.array([o.d1 for o in out])


@dataclass(frozen=True)
class DuallyFlatModel:
    """Potential pair on the theta and eta charts.

    ``eta_guess`` (theta -> eta) seeds the Newton solve when ``psi`` is
    numeric, ``theta_guess`` (eta -> theta) when ``psi_star`` is.
    """

    name: str
    n: int
    psi: PotentialModel | None = None
    psi_star: PotentialModel | None = None
    eta_guess: Callable[[np.ndarray], np.ndarray] | None = None
    theta_guess: Callable[[np.ndarray], np.ndarray] | None = None
    params: ParamChart | None = None

    def __post_init__(self):
        if self.psi is None and self.psi_star is None:
            raise ValueError("a dually-flat model needs at least one closed-form potential")
        if self.psi is None and self.eta_guess is None:
            raise ValueError("numeric psi needs an eta_guess")
        if self.psi_star is None and self.theta_guess is None:
            raise ValueError("numeric psi_star needs a theta_guess")
        for p in (self.psi, self.psi_star):
            if p is not None and p.n != self.n:
                raise ValueError(f"potential {p.name} has dimension {p.n}, model has {self.n}")

    def potential(self, chart: str) -> PotentialModel | None:
        other_chart(chart)
        return self.psi if chart == THETA else self.psi_star

    def point(self, chart: str, coords) -> Point:
        other_chart(chart)
        return Point(coords, chart)

    def from_params(self, params, chart: str = ETA) -> Point:
        if self.params is None:
            raise ValueError(f"{self.name} has no parameter chart")
        eta = Point(self.params.eta(params), ETA)
        return to_chart(self, eta, chart)

    def check(self, x: Point) -> np.ndarray:
        """Validate ``x`` against the domain of its chart and return its coordinates."""
        pot = self.potential(x.chart)
        if pot is not None:
            return pot.coords(x)
        arr = np.asarray(x.coords, dtype=float)
        if arr.size != self.n:
            raise DomainError(f"{self.name} expects {self.n} coordinates, got {arr.size}")
        return arr


def _require_chart(x: Point, chart: str) -> None:
    if not isinstance(x, Point):
        raise TypeError("expected a chart-tagged Point")
    if x.chart != chart:
        raise ChartError(f"expected a point in the {chart!r} chart, got {x.chart!r}")


def newton_solve(
    fun: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    target: np.ndarray,
    x0: np.ndarray,
    *,
    check: Callable[[np.ndarray], None] | None = None,
    tol: float = NEWTON_TOL,
    maxiter: int = NEWTON_MAXITER,
) -> np.ndarray:
    """Damped Newton for ``fun(x)[0] = target`` with Armijo backtracking.

    ``fun`` returns the value and its Jacobian. Trial points rejected by
    ``check`` are treated as failed line-search steps, so iterates never
    leave the domain. The Jacobian may be indefinite.
    """
    target = np.asarray(target, dtype=float)
    x = np.asarray(x0, dtype=float).copy()
    scale = max(1.0, float(np.max(np.abs(target))))
    if check is not None:
        check(x)
    val, jac = fun(x)
    r = val - target
    phi = 0.5 * float(r @ r)
    best_x, best_res = x.copy(), float(np.max(np.abs(r)))
    for _ in range(maxiter):
        res = float(np.max(np.abs(r)))
        if res <= tol * scale:
            return x
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Jacobian in Newton solve", best_res, best_x) from exc
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            trial = x + alpha * step
            try:
                if check is not None:
                    check(trial)
                tval, tjac = fun(trial)
            except (DomainError, ValueError, ZeroDivisionError):
                alpha *= 0.5
                continue
            tr = tval - target
            tphi = 0.5 * float(tr @ tr)
            if np.isfinite(tphi) and tphi <= (1.0 - 2e-4 * alpha) * phi:
                x, val, jac, r, phi = trial, tval, tjac, tr, tphi
                accepted = True
                break
            alpha *= 0.5
        res = float(np.max(np.abs(r)))
        if res < best_res:
            best_x, best_res = x.copy(), res
        if not accepted:
            # rounding floor: no descent left but already essentially converged
            if res <= 100.0 * tol * scale:
                return x
            raise ConvergenceError("line search failed in Newton solve", best_res, best_x)
    if best_res <= tol * scale:
        return best_x
    raise ConvergenceError(f"no convergence in {maxiter} Newton iterations", best_res, best_x)


def _grad_map(pot: PotentialModel):
    def fun(x):
        _, g, h, _ = taylor(pot.func, x, 2)
        return g, h

    return fun


def _solve_dual(m: DuallyFlatModel, x: Point) -> np.ndarray:
    """Coordinates of the point dual to ``x`` when the dual side is numeric."""
    target_chart = other_chart(x.chart)
    known = m.potential(target_chart)
    guess = m.eta_guess if x.chart == THETA else m.theta_guess
    target = np.asarray(x.coords, dtype=float)
    y0 = np.asarray(guess(target), dtype=float)
    return newton_solve(_grad_map(known), target, y0, check=known.check)


def eta_from_theta(m: DuallyFlatModel, theta: Point) -> Point:
    """``eta = grad psi(theta)``; Newton on ``grad psi_star(eta) = theta`` if psi is numeric."""
    _require_chart(theta, THETA)
    if m.psi is not None:
        arr = m.psi.coords(theta)
        _, g, _, _ = taylor(m.psi.func, arr, 1)
        return Point(g, ETA)
    return Point(_solve_dual(m, theta), ETA)


def theta_from_eta(m: DuallyFlatModel, eta: Point) -> Point:
    """``theta = grad psi_star(eta)``; Newton on ``grad psi(theta) = eta`` if psi_star is numeric."""
    _require_chart(eta, ETA)
    if m.psi_star is not None:
        arr = m.psi_star.coords(eta)
        _, g, _, _ = taylor(m.psi_star.func, arr, 1)
        return Point(g, THETA)
    return Point(_solve_dual(m, eta), THETA)


def to_chart(m: DuallyFlatModel, x: Point, chart: str) -> Point:
    """Express ``x`` in ``chart`` (explicit conversion, never inferred)."""
    other_chart(chart)
    if x.chart == chart:
        m.check(x)
        return x
    if x.chart == THETA:
        return eta_from_theta(m, x)
    if x.chart == ETA:
        return theta_from_eta(m, x)
    raise ChartError(f"cannot convert from chart {x.chart!r}")


@dataclass(frozen=True)
class PotentialJets:
    """Jets of the chart potential at a point, plus the dual coordinates."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray | None


def potential_jets(m: DuallyFlatModel, x: Point, order: int = 2) -> PotentialJets:
    """Value and derivatives of the potential of ``x``'s chart at ``x``.

    For a numeric conjugate F(x) = x.y - G(y) with grad G(y) = x, the
    derivatives are grad F = y, Hess F = (Hess G)^-1 and
    d^3 F = -K K K : d^3 G with K = Hess F.
    """
    pot = m.potential(x.chart)
    if pot is not None:
        arr = pot.coords(x)
        v, g, h, t = taylor(pot.func, arr, order)
        return PotentialJets(v, g, h, t)
    arr = np.asarray(x.coords, dtype=float)
    dual = m.potential(other_chart(x.chart))
    y = _solve_dual(m, x)
    gv, _, gh, gt = taylor(dual.func, y, 3 if order >= 3 else 2)
    try:
        k = np.linalg.inv(gh)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError(f"dual Hessian singular at {y}") from exc
    k = np.triu(k) + np.triu(k, 1).T
    t = None
    if order >= 3:
        t = -np.einsum("ia,jb,kc,abc->ijk", k, k, k, gt)
        t = _symmetric_third(t)
    return PotentialJets(float(arr @ y - gv), y, k, t)


def metric_at(m: DuallyFlatModel, x: Point) -> np.ndarray:
    """Hessian of the potential of ``x``'s chart: g_ij on theta, its inverse on eta."""
    other_chart(x.chart)
    return potential_jets(m, x, 2).hess


def duality_residual(m: DuallyFlatModel, theta: Point) -> float:
    """``max |Hess psi(theta) Hess psi_star(eta(theta)) - I|``."""
    _require_chart(theta, THETA)
    eta = eta_from_theta(m, theta)
    prod = metric_at(m, theta) @ metric_at(m, eta)
    return float(np.max(np.abs(prod - np.eye(m.n))))


def legendre_residual(m: DuallyFlatModel, theta: Point) -> float:
    """``|psi(theta) + psi_star(eta) - eta.theta|`` at corresponding points."""
    _require_chart(theta, THETA)
    eta = eta_from_theta(m, theta)
    a = potential_jets(m, theta, 1).value
    b = potential_jets(m, eta, 1).value
    return float(abs(a + b - float(np.dot(eta.coords, theta.coords))))
