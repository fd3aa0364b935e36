"""Gradient flows, conformal factors, constraint mechanics and RF deformations.

In a chart with potential F and metric H = Hess F the two gradient flows
share one form. The flow momentum is ``P = s * grad F`` with ``s = +1`` on
the theta chart (P = eta) and ``s = -1`` on the eta chart (P = -theta). With
a gauge field G subtracted, the covariant momentum is ``pi = P - G`` and
the velocity is ``v = H^-1 pi``. Pushed to the dual chart the velocity is
``H v = pi``, which is the linear law ``d eta/dt = eta - A`` or
``d theta/dt = -theta - A*``. The conformal factor is ``C^2 = v.H.v``.

The constraint ``Phi(x, p) = |p - G(x)|_{H^-1} / C(x)`` generates the flow
in the parameter ``lambda`` with ``d lambda = C^2 dt``. Its x-partials are
the direct ones, including the variation of C. On the flow's own momentum
they reduce to ``s * pi / C^2``, so the linear laws are recovered on shell.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .diffcalc import Jet, Point
from .dually_flat import (
    ETA,
    THETA,
    DuallyFlatModel,
    other_chart,
    potential_jets,
    to_chart,
)
from .errors import (
    ChartError,
    ConstraintError,
    ConvergenceError,
    DomainError,
    FlowError,
    SingularMetricError,
)

__all__ = [
    "FlowSpec",
    "GaugeField",
    "Trajectory",
    "ProductDrift",
    "conformal_factor",
    "conserved_products",
    "constraint_rhs",
    "constraint_value",
    "flow_momentum",
    "flow_rhs",
    "integrate",
    "integrate_constraint",
    "linear_rhs_check",
    "reparametrize",
    "rf_line_element",
    "zero_gauge",
]

log = logging.getLogger(__name__)

CONSTRAINT_INPUT_TOL = 1e-8
MIN_STEPS = 10
# products stop once either flow's step-doubling error estimate exceeds this, relative to |x|
PRODUCT_RESOLUTION = 1e-8


@dataclass(frozen=True)
class GaugeField:
    """Covector A_i(theta) on the theta chart, or vector A*^i(eta) on the eta chart.

    ``func`` maps coordinates to n components and must accept jets so its
    Jacobian can be formed exactly.
    """

    func: Callable[[Sequence], Sequence]
    chart: str
    n: int
    name: str = "custom"

    def __post_init__(self):
        other_chart(self.chart)

    def _eval(self, arr: np.ndarray, order: int):
        out = self.func(Jet.variables(arr, order) if order else tuple(arr))
        if len(out) != self.n:
            raise ValueError(f"gauge {self.name} returned {len(out)} components, expected {self.n}")
        return out

    def __call__(self, x) -> np.ndarray:
        arr = np.asarray(x.coords if isinstance(x, Point) else x, dtype=float)
        out = np.array([float(v) for v in self._eval(arr, 0)])
        if not np.all(np.isfinite(out)):
            raise FlowError(f"gauge {self.name} is not finite at {arr}")
        return out

    def jacobian(self, x) -> np.ndarray:
        """``J[i, k] = dA_i / dx^k``."""
        arr = np.asarray(x.coords if isinstance(x, Point) else x, dtype=float)
        rows = []
        for v in self._eval(arr, 1):
            rows.append(v.d1 if isinstance(v, Jet) else np.zeros(arr.size))
        return np.array(rows, dtype=float)


def zero_gauge(n: int, chart: str) -> GaugeField:
    return GaugeField(lambda x: (0.0,) * n, chart, n, name="zero")


@dataclass(frozen=True)
class FlowSpec:
    """One gradient flow: the model, the chart it runs in and an optional gauge.

    The theta-chart flow is the ascent flow (direction +1) and the eta-chart
    flow the descent flow (direction -1).
    """

    model: DuallyFlatModel
    chart: str
    gauge: GaugeField | None = None
    parameter: str = "t"

    def __post_init__(self):
        other_chart(self.chart)
        if self.parameter not in ("t", "lambda"):
            raise ValueError("parameter must be 't' or 'lambda'")
        if self.gauge is not None:
            if self.gauge.chart != self.chart:
                raise ChartError(
                    f"gauge lives on the {self.gauge.chart!r} chart, flow on {self.chart!r}"
                )
            if self.gauge.n != self.model.n:
                raise ValueError(f"gauge dimension {self.gauge.n} != model dimension {self.model.n}")

    @property
    def direction(self) -> int:
        return 1 if self.chart == THETA else -1

    @property
    def deformed(self) -> bool:
        return self.gauge is not None

    def partner(self) -> "FlowSpec":
        """The undeformed flow on the other chart."""
        return FlowSpec(self.model, other_chart(self.chart))


@dataclass(frozen=True)
class _Local:
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray | None
    momentum: np.ndarray
    gauge: np.ndarray
    pi: np.ndarray
    velocity: np.ndarray
    c2: float


def _as_point(spec: FlowSpec, x) -> Point:
    if isinstance(x, Point):
        if x.chart != spec.chart:
            raise ChartError(f"flow runs on the {spec.chart!r} chart, got a {x.chart!r} point")
        return x
    return Point(x, spec.chart)


def _local(spec: FlowSpec, x, order: int = 2) -> _Local:
    pt = _as_point(spec, x)
    jets = potential_jets(spec.model, pt, order)
    h = jets.hess
    momentum = spec.direction * jets.grad
    gauge = spec.gauge(pt) if spec.gauge is not None else np.zeros_like(momentum)
    pi = momentum - gauge
    try:
        v = np.linalg.solve(h, pi)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError(f"metric singular at {pt}") from exc
    if not np.all(np.isfinite(v)):
        raise SingularMetricError(f"metric singular at {pt}")
    return _Local(jets.grad, h, jets.third, momentum, gauge, pi, v, float(pi @ v))


def flow_rhs(spec: FlowSpec, x) -> np.ndarray:
    """Chart velocity dx/dt of the (possibly deformed) gradient flow."""
    return _local(spec, x).velocity


def flow_momentum(spec: FlowSpec, x) -> np.ndarray:
    """The flow's own momentum: eta on the theta chart, -theta on the eta chart."""
    pt = _as_point(spec, x)
    return spec.direction * potential_jets(spec.model, pt, 1).grad


def linear_rhs_check(spec: FlowSpec, x) -> float:
    """Residual between H v (the velocity in the dual chart) and the linear law."""
    loc = _local(spec, x)
    law = spec.direction * loc.grad - loc.gauge
    return float(np.max(np.abs(loc.hess @ loc.velocity - law)))


def _c_from(loc: _Local, pt) -> float:
    if loc.c2 < 0.0:
        raise FlowError(f"negative squared flow norm {loc.c2:.6g} at {pt}")
    return float(np.sqrt(loc.c2))


def conformal_factor(spec: FlowSpec, x) -> float:
    """C = sqrt(v.H.v), the chart-metric norm of the flow velocity."""
    return _c_from(_local(spec, x), x)


def _constraint_from(loc: _Local, p: np.ndarray, pt) -> tuple[float, float, float]:
    pi = np.asarray(p, dtype=float) - loc.gauge
    kpi = np.linalg.solve(loc.hess, pi)
    n2 = float(pi @ kpi)
    if n2 < 0.0:
        raise ConstraintError(f"negative radicand {n2:.6g} in the constraint at {pt}")
    c = _c_from(loc, pt)
    if c == 0.0:
        raise ConstraintError(f"flow norm vanishes at {pt}; constraint undefined")
    return float(np.sqrt(n2)) / c, n2, c


def constraint_value(spec: FlowSpec, x, p) -> float:
    """Phi = sqrt(H^-1 (p - G)(p - G)) / C; equal to 1 on the flow's own momentum."""
    loc = _local(spec, x)
    return _constraint_from(loc, p, x)[0]


def _constraint_partials(spec: FlowSpec, x, p) -> tuple[np.ndarray, np.ndarray, float]:
    pt = _as_point(spec, x)
    loc = _local(spec, pt, order=3)
    p = np.asarray(p, dtype=float)
    phi, n2, c = _constraint_from(loc, p, pt)
    k = np.linalg.inv(loc.hess)
    # dk[a, b, m] = d_m (H^-1)_{ab}
    dk = -np.einsum("ai,ijm,jb->abm", k, loc.third, k)
    n = p.size
    jg = spec.gauge.jacobian(pt) if spec.gauge is not None else np.zeros((n, n))
    pi = p - loc.gauge
    kpi = k @ pi
    dn2 = np.einsum("a,abm,b->m", pi, dk, pi) - 2.0 * kpi @ jg
    big_pi = loc.pi
    kbig = k @ big_pi
    dbig = spec.direction * loc.hess - jg
    dc2 = np.einsum("a,abm,b->m", big_pi, dk, big_pi) + 2.0 * kbig @ dbig
    nn = np.sqrt(n2)
    dphi_dp = kpi / (nn * c)
    dphi_dx = dn2 / (2.0 * nn * c) - nn * dc2 / (2.0 * c**3)
    return dphi_dp, dphi_dx, phi


def constraint_rhs(spec: FlowSpec, x, p) -> tuple[np.ndarray, np.ndarray]:
    """(dx/dlambda, dp/dlambda) = (dPhi/dp, -dPhi/dx) on the constraint surface."""
    dphi_dp, dphi_dx, phi = _constraint_partials(spec, x, p)
    if abs(phi - 1.0) > CONSTRAINT_INPUT_TOL:
        raise ConstraintError(f"Phi = {phi:.12g} at the input; expected 1")
    return dphi_dp, -dphi_dx


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled flow solution with per-sample diagnostics.

    ``coords`` are in ``spec.chart`` and ``dual_coords`` in the other chart.
    ``products[k, i, j] = eta_i theta^j`` pairs the first (theta-chart) and
    second (eta-chart) flows started from the same point; it covers the
    first ``len(products)`` samples, stopping early (at ``partner_exit``)
    if the partner flow leaves its domain or either flow stops being
    resolved by the step, and is ``None`` for deformed flows.
    """

    spec: FlowSpec
    parameter: str
    params: np.ndarray
    coords: np.ndarray
    dual_coords: np.ndarray
    conformal: np.ndarray
    constraint: np.ndarray
    linear_residuals: np.ndarray
    products: np.ndarray | None = None
    momenta: np.ndarray | None = None
    exit_step: int | None = None
    exit_reason: str | None = None
    partner_exit: float | None = None

    def __len__(self):
        return self.params.size

    @property
    def chart(self) -> str:
        return self.spec.chart

    @property
    def complete(self) -> bool:
        return self.exit_step is None

    def chart_series(self, chart: str) -> np.ndarray:
        if chart == self.spec.chart:
            return self.coords
        if chart == other_chart(self.spec.chart):
            return self.dual_coords
        raise ChartError(f"unknown chart {chart!r}")

    @property
    def theta(self) -> np.ndarray:
        return self.chart_series(THETA)

    @property
    def eta(self) -> np.ndarray:
        return self.chart_series(ETA)

    @property
    def step(self) -> float:
        return float(self.params[1] - self.params[0])


def _rk4(f, x: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


_EXIT_ERRORS = (DomainError, ConvergenceError, SingularMetricError)


def _checked_step(f, y: np.ndarray, h: float, k1: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """One RK4 step plus a step-doubling estimate of its local error."""
    if k1 is None:
        k1 = f(y)
    full = _rk4(f, y, h, k1)
    mid = _rk4(f, y, 0.5 * h, k1)
    half = _rk4(f, mid, 0.5 * h, f(mid))
    return full, float(np.max(np.abs(half - full))) / 15.0


def _resolved(err: float, x: np.ndarray) -> bool:
    return err <= PRODUCT_RESOLUTION * max(1.0, float(np.max(np.abs(x))))


def _validate_run(t_end: float, steps: int) -> None:
    if int(steps) != steps or steps < MIN_STEPS:
        raise ValueError(f"steps must be an integer >= {MIN_STEPS}, got {steps}")
    if not (np.isfinite(t_end) and t_end > 0):
        raise ValueError(f"t_end must be positive, got {t_end}")


def integrate(spec: FlowSpec, x0, t_end: float, steps: int) -> Trajectory:
    """Fixed-step RK4 integration of the gradient flow from ``x0``.

    Dual coordinates, C, Phi and the linear-law residual are recorded at
    every sample. For undeformed flows the partner flow on the other chart
    is integrated in lockstep from the same point so the products
    ``eta_i theta^j`` can be tracked. Products stop once the partner leaves
    the domain or either flow's step-doubling error estimate exceeds
    ``PRODUCT_RESOLUTION``, which happens ahead of a finite-time blow-up.
    Leaving the domain stops the run and returns the partial trajectory
    with the exit recorded.
    """
    _validate_run(t_end, steps)
    x0 = _as_point(spec, x0)
    spec.model.check(x0)
    h = t_end / steps
    n = spec.model.n
    chart = spec.chart

    partner = None if spec.deformed else spec.partner()
    y = None
    if partner is not None:
        y = np.array(to_chart(spec.model, x0, partner.chart).coords)

    def f(z):
        return _local(spec, z).velocity

    def fp(z):
        return _local(partner, z).velocity

    params, xs, duals, cs, phis, lin, prods = [], [], [], [], [], [], []
    exit_step = exit_reason = partner_exit = None
    x = np.array(x0.coords)
    for k in range(steps + 1):
        try:
            loc = _local(spec, x)
        except _EXIT_ERRORS as exc:
            exit_step, exit_reason = k, str(exc)
            break
        c = _c_from(loc, x)
        params.append(k * h)
        xs.append(x.copy())
        duals.append(loc.grad.copy())
        cs.append(c)
        phis.append(_constraint_from(loc, loc.momentum, x)[0] if c > 0 else 1.0)
        lin.append(float(np.max(np.abs(loc.hess @ loc.velocity - (spec.direction * loc.grad - loc.gauge)))))
        if y is not None:
            try:
                ploc = _local(partner, y)
                if chart == THETA:
                    prods.append(np.outer(loc.grad, ploc.grad))
                else:
                    prods.append(np.outer(ploc.grad, loc.grad))
            except _EXIT_ERRORS:
                partner_exit, y = k * h, None
        if k == steps:
            break
        try:
            if y is None:
                x_next, x_err = _rk4(f, x, h, loc.velocity), 0.0
            else:
                x_next, x_err = _checked_step(f, x, h, loc.velocity)
        except _EXIT_ERRORS as exc:
            exit_step, exit_reason = k + 1, str(exc)
            break
        if not np.all(np.isfinite(x_next)):
            raise FlowError(f"non-finite state after step {k + 1}")
        x = x_next
        if y is not None:
            try:
                y, y_err = _checked_step(fp, y, h)
            except _EXIT_ERRORS:
                partner_exit, y = (k + 1) * h, None
            else:
                if not (_resolved(x_err, x) and _resolved(y_err, y)):
                    log.info("flow pair unresolved after step %d; products stop", k + 1)
                    partner_exit, y = (k + 1) * h, None
    if exit_step is not None:
        log.warning("flow left its domain at step %d: %s", exit_step, exit_reason)
    if not params:
        raise FlowError(f"initial point rejected: {exit_reason}")
    return Trajectory(
        spec=spec,
        parameter="t",
        params=np.asarray(params),
        coords=np.asarray(xs).reshape(-1, n),
        dual_coords=np.asarray(duals).reshape(-1, n),
        conformal=np.asarray(cs),
        constraint=np.asarray(phis),
        linear_residuals=np.asarray(lin),
        products=None if partner is None else np.asarray(prods).reshape(-1, n, n),
        exit_step=exit_step,
        exit_reason=exit_reason,
        partner_exit=partner_exit,
    )


@dataclass(frozen=True)
class ProductDrift:
    """Drift of each product eta_i theta^j over the covered part of a run."""

    drift: np.ndarray
    initial: np.ndarray
    covered_until: float
    samples: int

    @property
    def max_drift(self) -> float:
        return float(np.max(self.drift))


def conserved_products(traj: Trajectory) -> ProductDrift:
    """``max_t |K_i^j(t) - K_i^j(0)|`` for an undeformed flow pair."""
    if traj.spec.deformed:
        raise FlowError("products are only conserved along undeformed flows")
    if traj.products is None or len(traj.products) == 0:
        raise FlowError("trajectory carries no product samples")
    k = traj.products
    drift = np.max(np.abs(k - k[0]), axis=0)
    return ProductDrift(
        drift=drift,
        initial=k[0].copy(),
        covered_until=float(traj.params[len(k) - 1]),
        samples=len(k),
    )


def integrate_constraint(
    spec: FlowSpec, x0, lam_end: float, steps: int, p0=None
) -> Trajectory:
    """RK4 integration of the constraint equations in (x, p).

    The momentum starts at the flow's own momentum unless ``p0`` is given
    (it must satisfy Phi = 1). Phi is recorded at every sample as the
    preservation diagnostic.
    """
    _validate_run(lam_end, steps)
    x0 = _as_point(spec, x0)
    spec.model.check(x0)
    n = spec.model.n
    p = flow_momentum(spec, x0) if p0 is None else np.asarray(p0, dtype=float)
    constraint_rhs(spec, x0, p)
    h = lam_end / steps

    def f(z):
        dp, dx = _constraint_partials(spec, z[:n], z[n:])[:2]
        return np.concatenate([dp, -dx])

    z = np.concatenate([np.array(x0.coords), p])
    params, xs, ps, duals, cs, phis, lin = [], [], [], [], [], [], []
    exit_step = exit_reason = None
    for k in range(steps + 1):
        try:
            loc = _local(spec, z[:n])
            phi = _constraint_from(loc, z[n:], z[:n])[0]
        except _EXIT_ERRORS as exc:
            exit_step, exit_reason = k, str(exc)
            break
        params.append(k * h)
        xs.append(z[:n].copy())
        ps.append(z[n:].copy())
        duals.append(loc.grad.copy())
        cs.append(_c_from(loc, z[:n]))
        phis.append(phi)
        lin.append(float(np.max(np.abs(loc.hess @ loc.velocity - (spec.direction * loc.grad - loc.gauge)))))
        if k == steps:
            break
        try:
            z_next = _rk4(f, z, h, f(z))
        except _EXIT_ERRORS as exc:
            exit_step, exit_reason = k + 1, str(exc)
            break
        if not np.all(np.isfinite(z_next)):
            raise FlowError(f"non-finite state after step {k + 1}")
        z = z_next
    if exit_step is not None:
        log.warning("constraint integration left its domain at step %d: %s", exit_step, exit_reason)
    return Trajectory(
        spec=replace(spec, parameter="lambda"),
        parameter="lambda",
        params=np.asarray(params),
        coords=np.asarray(xs).reshape(-1, n),
        dual_coords=np.asarray(duals).reshape(-1, n),
        conformal=np.asarray(cs),
        constraint=np.asarray(phis),
        linear_residuals=np.asarray(lin),
        momenta=np.asarray(ps).reshape(-1, n),
        exit_step=exit_step,
        exit_reason=exit_reason,
    )


def reparametrize(traj: Trajectory, to: str) -> Trajectory:
    """Switch between t and lambda using d lambda = C^2 dt (trapezoid rule).

    The inverse map divides each increment by the same segment average of
    C^2, so t -> lambda -> t reproduces the original axis up to rounding.
    """
    if to not in ("t", "lambda"):
        raise ValueError("target parameter must be 't' or 'lambda'")
    if to == traj.parameter:
        return traj
    c2 = np.asarray(traj.conformal, dtype=float) ** 2
    if not np.all(np.isfinite(c2)):
        raise FlowError("conformal factor missing or non-finite")
    seg = 0.5 * (c2[1:] + c2[:-1])
    if np.any(seg <= 0.0):
        raise FlowError("C^2 vanishes on a segment; the new parameter is not monotone")
    d = np.diff(traj.params)
    inc = d * seg if to == "lambda" else d / seg
    new = np.concatenate([[0.0], np.cumsum(inc)])
    if np.any(np.diff(new) <= 0.0):
        raise FlowError("reparametrized axis is not strictly increasing")
    return replace(traj, params=new, parameter=to, spec=replace(traj.spec, parameter=to))


def rf_line_element(spec: FlowSpec, x, dx) -> float:
    """Randers-Finsler length ``sqrt(H dx dx / C^2) + G.dx / C^2`` of a displacement."""
    loc = _local(spec, x)
    dx = np.asarray(dx, dtype=float)
    c2 = loc.c2
    if c2 <= 0.0:
        raise FlowError(f"non-positive squared flow norm {c2:.6g} at {x}")
    q = float(dx @ loc.hess @ dx) / c2
    if q < 0.0:
        raise FlowError(f"negative radicand {q:.6g} in the RF line element")
    return float(np.sqrt(q) + loc.gauge @ dx / c2)
