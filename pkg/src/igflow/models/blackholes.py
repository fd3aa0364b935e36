"""Kerr and Reissner-Nordstrom thermodynamic geometry in geometric units.

Kerr: ``M(S, J) = 1/2 sqrt(S + 4 J^2 / S)`` with inverse
``S(M, J) = 2 M^2 (1 +- sqrt(1 - s^2))``, ``s = J / M^2``. The sign selects the
outer (+) or inner (-) horizon branch and is fixed per model object.

Reissner-Nordstrom: ``S(M, Q) = (M + sqrt(M^2 - Q^2))^2`` and, in the chart
``(S, u)`` with ``u = Q / sqrt(S)``, ``M = sqrt(S) (1 + u^2) / 2``.

Each model exposes the printed Weinhold/Ruppeiner forms as closed-form
metric fields, the dual variables of the entropy potential, the Jacobian of
the variable map used to push dual variables forward, and a dually-flat
model on ``eta = (M, J)`` or ``(M, Q)`` whose theta side is the numeric
Legendre conjugate of the entropy. The closed-form conjugates are kept
separately as oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..diffcalc import Point, PotentialModel, sqrt
from ..dually_flat import ETA, THETA, DuallyFlatModel, ParamChart, newton_solve
from ..errors import ConvergenceError, DomainError
from ..tensor import MetricField

__all__ = [
    "DecayReport",
    "KerrModel",
    "RNModel",
    "decay_solution_check",
    "kerr_model",
    "pushforward_dual_vars",
    "rn_model",
]

DEFAULT_MARGIN = 0.05
KERR_CHART = "(M,sigma)"
RN_CHART = "(S,u)"


def pushforward_dual_vars(jacobian, theta) -> np.ndarray:
    """``theta~^a = (d eta_i / d eta~_a) theta^i``, the transpose-Jacobian action."""
    jac = np.asarray(jacobian, dtype=float)
    th = np.asarray(theta, dtype=float).reshape(-1)
    if jac.ndim != 2 or jac.shape[0] != jac.shape[1]:
        raise ValueError(f"jacobian must be square, got shape {jac.shape}")
    if jac.shape[0] != th.size:
        raise ValueError(f"jacobian is {jac.shape[0]}x{jac.shape[1]} but theta has {th.size} entries")
    if not np.all(np.isfinite(jac)):
        raise ValueError("jacobian has non-finite entries")
    return jac.T @ th


@dataclass(frozen=True)
class KerrModel:
    """Kerr black hole on one horizon branch (+1 outer, -1 inner)."""

    branch: int = 1
    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 (outer) or -1 (inner)")
        if not 0.0 < self.margin < 0.5:
            raise ValueError("margin must lie in (0, 0.5)")

    @property
    def name(self) -> str:
        return "kerr_outer" if self.branch == 1 else "kerr_inner"

    @property
    def sigma_max(self) -> float:
        return 1.0 - self.margin

    def check_state(self, m, sigma) -> None:
        """Reject extremal, super-extremal or (inner branch) degenerate states."""
        if not m > 0.0:
            raise DomainError(f"mass must be positive, got {m}", 0)
        if not abs(sigma) < self.sigma_max:
            raise DomainError(
                f"|sigma| = {abs(sigma):.6g} reaches the extremal margin {self.sigma_max}", 1
            )
        if self.branch == -1 and abs(sigma) <= self.margin:
            raise DomainError("inner-branch Hessian degenerates at sigma = 0", 1)

    # closed-form relations; all accept floats and jets

    @staticmethod
    def mass(s, j):
        return 0.5 * sqrt(s + 4.0 * j * j / s)

    def entropy(self, m, j):
        sig = j / (m * m)
        return 2.0 * m * m * (1.0 + self.branch * sqrt(1.0 - sig * sig))

    def dual_coords(self, m, sigma):
        """(theta^M, theta^J) = gradient of the entropy at (M, sigma)."""
        w = 1.0 / sqrt(1.0 - sigma * sigma)
        return (4.0 * m * (1.0 + self.branch * w), -self.branch * 2.0 * sigma * w)

    def weinhold_at(self, x):
        m, sigma = x
        q = 1.0 - sigma * sigma
        return [
            [4.0 * (1.0 + self.branch / sqrt(q)), 0.0],
            [0.0, -self.branch * 2.0 * m * m / q**1.5],
        ]

    @staticmethod
    def variable_map_jacobian(m: float, sigma: float) -> np.ndarray:
        """d(M, J)/d(M, sigma)."""
        return np.array([[1.0, 0.0], [2.0 * m * sigma, m * m]])

    def state_from_mj(self, m: float, j: float) -> np.ndarray:
        sigma = j / (m * m)
        self.check_state(m, sigma)
        return np.array([m, sigma])

    def _constraint(self, arr) -> str | None:
        try:
            self.check_state(arr[0], arr[1] / (arr[0] * arr[0]))
        except DomainError as exc:
            return str(exc)
        return None

    def entropy_potential(self) -> PotentialModel:
        return PotentialModel(
            lambda e: self.entropy(e[0], e[1]),
            ("M", "J"),
            ETA,
            lower=(0.0, -math.inf),
            upper=(math.inf, math.inf),
            constraint=self._constraint,
            name=f"{self.name}_entropy",
        )

    def mass_potential(self) -> PotentialModel:
        def admissible(arr):
            s, j = arr
            m = float(self.mass(s, j))
            return self._constraint(np.array([m, j]))

        return PotentialModel(
            lambda x: self.mass(x[0], x[1]),
            ("S", "J"),
            "(S,J)",
            lower=(0.0, -math.inf),
            upper=(math.inf, math.inf),
            constraint=admissible if self.branch == 1 else None,
            name="kerr_mass",
        )

    def conjugate_potential(self) -> PotentialModel:
        """Closed-form Legendre conjugate of the entropy, theta_M^2 / (8 (1 +- w))."""
        b = self.branch
        jmax = 2.0 * self.sigma_max / math.sqrt(1.0 - self.sigma_max**2)

        def psi(t):
            w = sqrt(1.0 + 0.25 * t[1] * t[1])
            return t[0] * t[0] / (8.0 * (1.0 + b * w))

        def admissible(arr):
            if b * arr[0] <= 0.0:
                return "theta_M has the wrong sign for this branch"
            if abs(arr[1]) >= jmax:
                return "theta_J beyond the extremal margin"
            return None

        return PotentialModel(
            psi, ("thetaM", "thetaJ"), THETA, constraint=admissible, name=f"{self.name}_conjugate"
        )

    def eta_from_theta_closed(self, theta: np.ndarray) -> np.ndarray:
        """Invert the dual-variable map in closed form (used as the Newton seed)."""
        tm, tj = float(theta[0]), float(theta[1])
        w = math.sqrt(1.0 + 0.25 * tj * tj)
        sigma = -self.branch * tj / (2.0 * w)
        m = tm / (4.0 * (1.0 + self.branch * w))
        return np.array([m, sigma * m * m])

    @property
    def weinhold(self) -> MetricField:
        """The printed Weinhold form on (M, sigma)."""
        return MetricField.closed_form(
            self.weinhold_at,
            ("M", "sigma"),
            (0.0, -self.sigma_max),
            (2.0, self.sigma_max),
            chart=KERR_CHART,
            name=f"{self.name}_weinhold",
            constraint=lambda a: self._constraint(np.array([a[0], a[1] * a[0] ** 2])),
        )

    @property
    def mass_hessian(self) -> MetricField:
        """Hessian of M(S, J), the Weinhold metric in its own variables."""
        return MetricField.from_potential(
            self.mass_potential(), (0.0, -0.5), (3.0, 0.5), name="kerr_mass_hessian"
        )

    @property
    def dually_flat(self) -> DuallyFlatModel:
        return DuallyFlatModel(
            name=self.name,
            n=2,
            psi=None,
            psi_star=self.entropy_potential(),
            eta_guess=self.eta_from_theta_closed,
            params=ParamChart(
                ("M", "sigma"),
                lambda p: (p[0], p[1] * p[0] * p[0]),
                lambda e: (e[0], e[1] / (e[0] * e[0])),
            ),
        )

    def dually_flat_closed(self) -> DuallyFlatModel:
        """Same model with the closed-form conjugate in place of the Newton solve."""
        return DuallyFlatModel(
            name=f"{self.name}_closed",
            n=2,
            psi=self.conjugate_potential(),
            psi_star=self.entropy_potential(),
        )


def kerr_model(branch: int = 1, margin: float = DEFAULT_MARGIN) -> KerrModel:
    return KerrModel(branch=branch, margin=margin)


@dataclass(frozen=True)
class RNModel:
    """Reissner-Nordstrom black hole on the outer-horizon branch."""

    margin: float = DEFAULT_MARGIN

    def __post_init__(self):
        if not 0.0 < self.margin < 0.5:
            raise ValueError("margin must lie in (0, 0.5)")

    name = "rn"

    @property
    def u_max(self) -> float:
        return 1.0 - self.margin

    def check_state(self, s, u) -> None:
        if not s > 0.0:
            raise DomainError(f"entropy must be positive, got {s}", 0)
        if not abs(u) < self.u_max:
            raise DomainError(f"|u| = {abs(u):.6g} reaches the extremal margin {self.u_max}", 1)

    @staticmethod
    def entropy(m, q):
        return (m + sqrt(m * m - q * q)) ** 2

    @staticmethod
    def mass(s, u):
        return 0.5 * sqrt(s) * (1.0 + u * u)

    @staticmethod
    def charge(s, u):
        return u * sqrt(s)

    def temperature(self, s, u):
        t = (1.0 - u * u) / (4.0 * sqrt(s))
        if float(t) <= 0.0:
            raise DomainError("temperature is not positive", 1)
        return t

    @staticmethod
    def dual_coords(s, u):
        """(theta^M, theta^Q) = gradient of the entropy, in the (S, u) chart."""
        tm = 4.0 * sqrt(s) / (1.0 - u * u)
        return (tm, -u * tm)

    @staticmethod
    def weinhold_at(x):
        s, u = x
        return [[-(1.0 - u * u) / (8.0 * s**1.5), 0.0], [0.0, sqrt(s)]]

    @staticmethod
    def ruppeiner_at(x):
        s, u = x
        return [[-1.0 / (2.0 * s), 0.0], [0.0, 4.0 * s / (1.0 - u * u)]]

    @staticmethod
    def variable_map_jacobian(s: float, u: float) -> np.ndarray:
        """d(M, Q)/d(S, u)."""
        r = math.sqrt(s)
        return np.array([[(1.0 + u * u) / (2.0 * r), r * u], [u / (2.0 * r), r]])

    def state_from_mq(self, m: float, q: float) -> np.ndarray:
        if not m > 0.0 or abs(q) >= m:
            raise DomainError("need |Q| < M", 1)
        s = float(self.entropy(m, q))
        u = q / math.sqrt(s)
        self.check_state(s, u)
        return np.array([s, u])

    def _mq_constraint(self, arr) -> str | None:
        m, q = arr
        if not m > 0.0 or abs(q) >= m:
            return "need |Q| < M"
        u = q / (m + math.sqrt(m * m - q * q))
        if abs(u) >= self.u_max:
            return f"|u| = {abs(u):.6g} reaches the extremal margin {self.u_max}"
        return None

    def _su_constraint(self, arr) -> str | None:
        try:
            self.check_state(arr[0], arr[1])
        except DomainError as exc:
            return str(exc)
        return None

    def entropy_potential(self) -> PotentialModel:
        return PotentialModel(
            lambda e: self.entropy(e[0], e[1]),
            ("M", "Q"),
            ETA,
            lower=(0.0, -math.inf),
            upper=(math.inf, math.inf),
            constraint=self._mq_constraint,
            name="rn_entropy",
        )

    def mass_potential(self) -> PotentialModel:
        """M(S, Q) = (S + Q^2) / (2 sqrt(S)) on the (S, Q) chart."""

        def admissible(arr):
            s, q = arr
            return self._su_constraint(np.array([s, q / math.sqrt(s)])) if s > 0 else "S <= 0"

        return PotentialModel(
            lambda x: (x[0] + x[1] * x[1]) / (2.0 * sqrt(x[0])),
            ("S", "Q"),
            "(S,Q)",
            lower=(0.0, -math.inf),
            upper=(math.inf, math.inf),
            constraint=admissible,
            name="rn_mass",
        )

    def conjugate_potential(self) -> PotentialModel:
        """Closed-form Legendre conjugate of the entropy, (tM^2 - tQ^2)^2 / (16 tM^2)."""
        umax = self.u_max

        def psi(t):
            d = t[0] * t[0] - t[1] * t[1]
            return d * d / (16.0 * t[0] * t[0])

        def admissible(arr):
            if arr[0] <= 0.0:
                return "theta_M must be positive"
            if abs(arr[1] / arr[0]) >= umax:
                return "theta ratio beyond the extremal margin"
            return None

        return PotentialModel(psi, ("thetaM", "thetaQ"), THETA, constraint=admissible, name="rn_conjugate")

    @staticmethod
    def eta_from_theta_closed(theta: np.ndarray) -> np.ndarray:
        tm, tq = float(theta[0]), float(theta[1])
        u = -tq / tm
        r = tm * (1.0 - u * u) / 4.0
        return np.array([0.5 * r * (1.0 + u * u), u * r])

    def _metric(self, func, name) -> MetricField:
        return MetricField.closed_form(
            func,
            ("S", "u"),
            (0.0, -self.u_max),
            (3.0, self.u_max),
            chart=RN_CHART,
            name=name,
            constraint=self._su_constraint,
        )

    @property
    def weinhold(self) -> MetricField:
        return self._metric(self.weinhold_at, "rn_weinhold")

    @property
    def ruppeiner(self) -> MetricField:
        return self._metric(self.ruppeiner_at, "rn_ruppeiner")

    @property
    def entropy_hessian(self) -> MetricField:
        """Minus the Hessian of S(M, Q), the Ruppeiner metric in its own variables."""
        return MetricField.from_potential(
            self.entropy_potential(), (0.0, -2.0), (3.0, 2.0), sign=-1.0, name="rn_entropy_hessian"
        )

    @property
    def dually_flat(self) -> DuallyFlatModel:
        return DuallyFlatModel(
            name="rn",
            n=2,
            psi=None,
            psi_star=self.entropy_potential(),
            eta_guess=self.eta_from_theta_closed,
            params=ParamChart(("M", "Q"), lambda p: tuple(p), lambda e: tuple(e)),
        )

    def dually_flat_closed(self) -> DuallyFlatModel:
        return DuallyFlatModel(
            name="rn_closed",
            n=2,
            psi=self.conjugate_potential(),
            psi_star=self.entropy_potential(),
        )


def rn_model(margin: float = DEFAULT_MARGIN) -> RNModel:
    return RNModel(margin=margin)


@dataclass(frozen=True)
class DecayReport:
    """Outcome of solving theta(x(t)) = theta(x0) exp(-t) along a time grid.

    ``states`` are in the model's state chart, (M, sigma) for Kerr and
    (S, u) for RN. ``ratio`` is -theta^Q/theta^M along the RN path and
    ``reference`` the printed Kerr closed form (sigma, M) for comparison.
    """

    model: str
    chart: str
    times: np.ndarray
    states: np.ndarray
    residuals: np.ndarray
    exit_time: float | None
    message: str
    ratio: np.ndarray | None = None
    reference: np.ndarray | None = None

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else float("nan")

    @property
    def complete(self) -> bool:
        return self.exit_time is None


def _theta_map(fn: Callable) -> Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]:
    from ..diffcalc import Jet

    def fun(x):
        out = fn(*Jet.variables(x, 1))
        return np.array([o.val for o in out]), np.array([o.d1 for o in out])

    return fun


def decay_solution_check(
    model: KerrModel | RNModel, x0, t_end: float, samples: int = 50
) -> DecayReport:
    """Solve the exponential-decay laws of the dual variables for the state.

    At each of ``samples`` times the state x(t) solving
    ``theta(x(t)) = theta(x0) exp(-t)`` is found by damped Newton, seeded
    with the previous sample. Reaching the extremal margin or failing to
    converge ends the run early with the exit time recorded.
    """
    if isinstance(model, KerrModel):
        chart, theta_fn = KERR_CHART, model.dual_coords
    elif isinstance(model, RNModel):
        chart, theta_fn = RN_CHART, model.dual_coords
    else:
        raise TypeError("decay_solution_check expects a KerrModel or RNModel")
    if isinstance(x0, Point):
        if x0.chart != chart:
            raise ValueError(f"expected a {chart} state, got chart {x0.chart!r}")
        x = np.array(x0.coords)
    else:
        x = np.asarray(x0, dtype=float).reshape(2).copy()
    if not t_end > 0 or samples < 2:
        raise ValueError("need t_end > 0 and at least two samples")
    model.check_state(*x)

    fun = _theta_map(theta_fn)
    theta0 = fun(x)[0]
    times = np.linspace(0.0, t_end, samples)
    states, residuals = [], []
    exit_time, message = None, "ok"
    for t in times:
        target = theta0 * math.exp(-t)
        try:
            x = newton_solve(fun, target, x, check=lambda z: model.check_state(*z))
        except (ConvergenceError, DomainError) as exc:
            exit_time, message = float(t), f"stopped at t = {t:.6g}: {exc}"
            break
        states.append(x.copy())
        residuals.append(float(np.max(np.abs(fun(x)[0] - target))))
    states_arr = np.asarray(states).reshape(-1, 2)
    solved_times = times[: len(states)]

    ratio = reference = None
    if isinstance(model, RNModel):
        th = np.array([fun(s)[0] for s in states_arr]).reshape(-1, 2)
        ratio = -th[:, 1] / th[:, 0]
    else:
        a, b = theta0
        e2 = (0.5 * b) ** 2 * np.exp(-2.0 * times)
        reference = np.stack(
            [1.0 + 1.0 / (1.0 + e2), a * np.exp(-2.0 * times) / (4.0 * np.sqrt(1.0 + e2))], axis=1
        )
    return DecayReport(
        model=model.name,
        chart=chart,
        times=solved_times,
        states=states_arr,
        residuals=np.asarray(residuals),
        exit_time=exit_time,
        message=message,
        ratio=ratio,
        reference=reference,
    )
