"""The potential family psi(x, y) = x^a f(sigma) with sigma = x^b y.

Three coordinate views of the same Hessian metric are provided:

    general     on (x, y), any (a, b)
    weinhold    on (x, sigma), requires b = -a
    ruppeiner   on (psi, sigma), requires b = -1

Each closed form can be cross-checked against the Hessian of psi pulled
back through the coordinate change (``flat_family_pullback``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from ..diffcalc import Jet, Point, PotentialModel, power, taylor
from ..errors import DomainError
from ..tensor import MetricField

__all__ = [
    "FORMS",
    "FlatFamilySpec",
    "flat_family_dual_vars",
    "flat_family_metric",
    "flat_family_metric_field",
    "flat_family_potential",
    "flat_family_pullback",
]

GENERAL = "general"
WEINHOLD = "weinhold"
RUPPEINER = "ruppeiner"
FORMS = (GENERAL, WEINHOLD, RUPPEINER)
CHARTS = {GENERAL: "(x,y)", WEINHOLD: "(x,sigma)", RUPPEINER: "(psi,sigma)"}
NAMES = {GENERAL: ("x", "y"), WEINHOLD: ("x", "sigma"), RUPPEINER: ("psi", "sigma")}


@dataclass(frozen=True)
class FlatFamilySpec:
    """Exponents ``a``, ``b`` and a profile ``f`` with its first two derivatives.

    ``f`` must accept jets when the spec is used through
    :func:`flat_family_potential`. Closed-form curvature is most accurate
    when ``f``, ``df`` and ``d2f`` also accept mpmath numbers.
    """

    a: float
    b: float
    f: Callable[[Any], Any]
    df: Callable[[float], float]
    d2f: Callable[[float], float]
    name: str = "flat_family"

    @classmethod
    def from_function(cls, a: float, b: float, f: Callable[[Any], Any], name: str = "flat_family"):
        """Derive ``df`` and ``d2f`` from ``f`` by forward-mode jets (float precision)."""

        def derivs(s):
            (u,) = Jet.variables([float(s)], 2)
            return f(u)

        return cls(
            a=float(a),
            b=float(b),
            f=f,
            df=lambda s: float(np.asarray(derivs(s).d1).reshape(-1)[0]),
            d2f=lambda s: float(np.asarray(derivs(s).d2).reshape(-1)[0]),
            name=name,
        )

    def values(self, s):
        return self.f(s), self.df(s), self.d2f(s)

    def require_form(self, form: str) -> None:
        if form not in FORMS:
            raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
        if form == WEINHOLD and not math.isclose(self.b, -self.a, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(f"weinhold form needs b = -a, got a = {self.a}, b = {self.b}")
        if form == RUPPEINER and not math.isclose(self.b, -1.0, rel_tol=0.0, abs_tol=1e-12):
            raise ValueError(f"ruppeiner form needs b = -1, got b = {self.b}")
        if form == RUPPEINER and self.a == 0.0:
            raise ValueError("ruppeiner form needs a != 0")


def _positive_x(arr) -> str | None:
    return None if arr[0] > 0.0 else "x must be positive"


def flat_family_potential(spec: FlatFamilySpec) -> PotentialModel:
    """psi(x, y) on the (x, y) chart, x > 0."""
    a, b = spec.a, spec.b

    def psi(v):
        x, y = v
        return power(x, a) * spec.f(power(x, b) * y)

    return PotentialModel(
        psi, NAMES[GENERAL], CHARTS[GENERAL], lower=(0.0, -math.inf), upper=(math.inf, math.inf),
        name=spec.name,
    )


def _coords(x, form: str) -> np.ndarray:
    if isinstance(x, Point):
        if x.chart != CHARTS[form]:
            raise ValueError(f"{form} form lives on chart {CHARTS[form]!r}, got {x.chart!r}")
        arr = np.asarray(x.coords, dtype=float)
    else:
        arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size != 2:
        raise ValueError(f"expected two coordinates, got {arr.size}")
    if not arr[0] > 0.0:
        raise DomainError(f"{NAMES[form][0]} must be positive, got {arr[0]}", 0)
    return arr


def _general(spec: FlatFamilySpec, x: float, y: float) -> list:
    a, b = spec.a, spec.b
    s = x**b * y
    f, f1, f2 = spec.values(s)
    xx = a * (a - 1) * f + b * (2 * a + b - 1) * s * f1 + b * b * s * s * f2
    xy = ((a + b) * f1 + b * s * f2) * x ** (b + 1)
    yy = x ** (2 * (b + 1)) * f2
    c = x ** (a - 2)
    return [[c * xx, c * xy], [c * xy, c * yy]]


def _weinhold(spec: FlatFamilySpec, x: float, s: float) -> list:
    a = spec.a
    f, f1, f2 = spec.values(s)
    c = x ** (a - 2)
    return [[c * a * (a - 1) * (f - s * f1), 0.0], [0.0, c * x * x * f2]]


def _ruppeiner(spec: FlatFamilySpec, p: float, s: float) -> list:
    a = spec.a
    f, f1, f2 = spec.values(s)
    k = (a - 1) / a
    return [[k / p, 0.0], [0.0, p * (f2 / f - k * (f1 / f) ** 2)]]


_BUILDERS = {GENERAL: _general, WEINHOLD: _weinhold, RUPPEINER: _ruppeiner}


def flat_family_metric(spec: FlatFamilySpec, x, form: str = GENERAL) -> np.ndarray:
    """Closed-form metric of ``form`` at ``x`` (coordinates of that form's chart)."""
    spec.require_form(form)
    arr = _coords(x, form)
    return np.array(_BUILDERS[form](spec, *arr), dtype=float)


def _to_xy(spec: FlatFamilySpec, form: str) -> Callable:
    a, b = spec.a, spec.b
    if form == GENERAL:
        return lambda v: (v[0], v[1])
    if form == WEINHOLD:
        return lambda v: (v[0], v[1] * power(v[0], a))

    def from_psi(v):
        p, s = v
        x = power(p / spec.f(s), 1.0 / a)
        return (x, s * power(x, -b))

    return from_psi


def flat_family_pullback(spec: FlatFamilySpec, x, form: str = GENERAL) -> np.ndarray:
    """Hessian of psi on (x, y) pulled back to the chart of ``form`` (J^T H J)."""
    spec.require_form(form)
    arr = _coords(x, form)
    out = _to_xy(spec, form)(Jet.variables(arr, 1))
    xy = np.array([float(o.val) for o in out])
    jac = np.array([np.asarray(o.d1, dtype=float) for o in out])
    pot = flat_family_potential(spec)
    _, _, hess, _ = taylor(pot.func, pot.coords(xy), 2)
    return jac.T @ hess @ jac


def flat_family_metric_field(
    spec: FlatFamilySpec,
    form: str = GENERAL,
    lower=(0.2, -1.0),
    upper=(2.0, 1.0),
) -> MetricField:
    """The closed form of ``form`` as a MetricField over a coordinate box."""
    spec.require_form(form)
    builder = _BUILDERS[form]
    return MetricField.closed_form(
        lambda v: builder(spec, v[0], v[1]),
        NAMES[form],
        lower,
        upper,
        chart=CHARTS[form],
        name=f"{spec.name}_{form}",
        constraint=_positive_x,
    )


def flat_family_dual_vars(spec: FlatFamilySpec, x) -> tuple[float, float]:
    """(theta^x, theta^y) = gradient of psi at a point of the (x, y) chart."""
    xv, yv = _coords(x, GENERAL)
    a, b = spec.a, spec.b
    s = xv**b * yv
    f, f1, _ = (float(v) for v in spec.values(s))
    return (xv ** (a - 1) * (a * f + b * s * f1), xv ** (a + b) * f1)
