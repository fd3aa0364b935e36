"""Forward-mode Taylor jets and an independent finite-difference oracle.

A :class:`Jet` is a multivariate Taylor polynomial truncated at order three.
Seeding each coordinate with a unit gradient and evaluating a potential on
the seeded jets yields the value, gradient, Hessian and third-derivative
tensor in a single pass, exact up to floating-point rounding.

Potentials are ordinary Python callables that take a sequence of
coordinates. Written with the elementary functions exported here
(:func:`log`, :func:`sqrt`, ...) they accept floats, jets and mpmath numbers
alike, which is what lets the oracle run in extended precision.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Sequence

import mpmath
import numpy as np
from mpmath.ctx_mp_python import _mpf

from .errors import ChartError, DomainError

__all__ = [
    "Jet",
    "Jet2",
    "Jet3",
    "Point",
    "PotentialModel",
    "central_differences",
    "cos",
    "exp",
    "fd_oracle",
    "fd_steps",
    "jet2",
    "jet3",
    "log",
    "power",
    "sin",
    "sqrt",
]

FD_REL_STEP = 1e-5
EXTENDED_DPS = 40


def _sym3(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    """Return T_ijk = M_ij v_k + M_ik v_j + M_jk v_i."""
    return (
        mat[:, :, None] * vec[None, None, :]
        + mat[:, None, :] * vec[None, :, None]
        + mat[None, :, :] * vec[:, None, None]
    )


def _outer3(vec: np.ndarray) -> np.ndarray:
    return vec[:, None, None] * vec[None, :, None] * vec[None, None, :]


def _is_const(x) -> bool:
    return isinstance(x, (int, float, np.integer, np.floating)) and not isinstance(x, bool)


class Jet:
    """Truncated Taylor expansion of a scalar in n variables.

    ``d1`` is the gradient, ``d2`` the Hessian and ``d3`` the third-derivative
    tensor. Higher slots are ``None`` when the jet was seeded at lower order.
    """

    __slots__ = ("val", "d1", "d2", "d3")
    # keep numpy from broadcasting over jets; scalar * Jet falls through to __rmul__
    __array_ufunc__ = None

    def __init__(self, val, d1, d2=None, d3=None):
        self.val = float(val)
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    @classmethod
    def variables(cls, x: Sequence[float], order: int) -> tuple["Jet", ...]:
        x = np.asarray(x, dtype=float)
        n = x.size
        eye = np.eye(n)
        d2 = np.zeros((n, n)) if order >= 2 else None
        d3 = np.zeros((n, n, n)) if order >= 3 else None
        return tuple(cls(x[i], eye[i].copy(), d2, d3) for i in range(n))

    @property
    def order(self) -> int:
        if self.d3 is not None:
            return 3
        return 2 if self.d2 is not None else 1

    def _const(self, c: float) -> "Jet":
        z = np.zeros_like(self.d1)
        return Jet(
            c,
            z,
            None if self.d2 is None else np.zeros_like(self.d2),
            None if self.d3 is None else np.zeros_like(self.d3),
        )

    def _scale(self, c: float) -> "Jet":
        return Jet(
            self.val * c,
            self.d1 * c,
            None if self.d2 is None else self.d2 * c,
            None if self.d3 is None else self.d3 * c,
        )

    def compose(self, f0: float, f1: float, f2: float, f3: float) -> "Jet":
        """Apply a univariate function whose first derivatives at ``val`` are given."""
        u1 = self.d1
        d2 = d3 = None
        if self.d2 is not None:
            d2 = f2 * np.outer(u1, u1) + f1 * self.d2
        if self.d3 is not None:
            d3 = f3 * _outer3(u1) + f2 * _sym3(self.d2, u1) + f1 * self.d3
        return Jet(f0, f1 * u1, d2, d3)

    # arithmetic

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(
                self.val + other.val,
                self.d1 + other.d1,
                None if self.d2 is None else self.d2 + other.d2,
                None if self.d3 is None else self.d3 + other.d3,
            )
        if _is_const(other):
            return Jet(self.val + other, self.d1, self.d2, self.d3)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return self._scale(-1.0)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, Jet) or _is_const(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        if _is_const(other):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other):
        if _is_const(other):
            return self._scale(float(other))
        if not isinstance(other, Jet):
            return NotImplemented
        a, b = self, other
        d1 = a.d1 * b.val + a.val * b.d1
        d2 = d3 = None
        if a.d2 is not None:
            d2 = a.d2 * b.val + a.val * b.d2 + np.outer(a.d1, b.d1) + np.outer(b.d1, a.d1)
        if a.d3 is not None:
            d3 = a.d3 * b.val + a.val * b.d3 + _sym3(a.d2, b.d1) + _sym3(b.d2, a.d1)
        return Jet(a.val * b.val, d1, d2, d3)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        if v == 0.0:
            raise ZeroDivisionError("jet division by zero")
        r = 1.0 / v
        return self.compose(r, -r * r, 2.0 * r**3, -6.0 * r**4)

    def __truediv__(self, other):
        if _is_const(other):
            return self._scale(1.0 / float(other))
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return NotImplemented

    def __rtruediv__(self, other):
        if _is_const(other):
            return self.reciprocal() * float(other)
        return NotImplemented

    def __pow__(self, c):
        if isinstance(c, Jet):
            return exp(c * log(self))
        if not _is_const(c):
            return NotImplemented
        c = float(c)
        if c == 0.0:
            return self._const(1.0)
        if c == 1.0:
            return self
        v = self.val
        if v < 0.0 and not c.is_integer():
            raise ValueError(f"non-integer power {c} of negative value {v}")
        f = []
        coef = 1.0
        for k in range(4):
            f.append(0.0 if coef == 0.0 else coef * v ** (c - k))
            coef *= c - k
        return self.compose(*f)

    def __rpow__(self, base):
        if not _is_const(base):
            return NotImplemented
        return exp(self * math.log(base))

    # comparisons act on the value so potentials can branch on it

    def _v(self, other):
        return other.val if isinstance(other, Jet) else other

    def __lt__(self, other):
        return self.val < self._v(other)

    def __le__(self, other):
        return self.val <= self._v(other)

    def __gt__(self, other):
        return self.val > self._v(other)

    def __ge__(self, other):
        return self.val >= self._v(other)

    def __float__(self):
        return self.val

    def __repr__(self):
        return f"Jet(val={self.val!r}, order={self.order})"


def _unary(x, jet_rule, mp_name: str, np_func, math_func):
    if isinstance(x, Jet):
        return jet_rule(x)
    if isinstance(x, _mpf):
        return getattr(x.context, mp_name)(x)
    if isinstance(x, np.ndarray):
        return np_func(x)
    return math_func(x)


def _exp_rule(u: Jet) -> Jet:
    e = math.exp(u.val)
    return u.compose(e, e, e, e)


def _log_rule(u: Jet) -> Jet:
    v = u.val
    if v <= 0.0:
        raise ValueError(f"log of non-positive value {v}")
    r = 1.0 / v
    return u.compose(math.log(v), r, -r * r, 2.0 * r**3)


def _sqrt_rule(u: Jet) -> Jet:
    v = u.val
    if v <= 0.0:
        raise ValueError(f"sqrt jet at non-positive value {v}")
    s = math.sqrt(v)
    return u.compose(s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v))


def _sin_rule(u: Jet) -> Jet:
    s, c = math.sin(u.val), math.cos(u.val)
    return u.compose(s, c, -s, -c)


def _cos_rule(u: Jet) -> Jet:
    s, c = math.sin(u.val), math.cos(u.val)
    return u.compose(c, -s, -c, s)


def exp(x):
    return _unary(x, _exp_rule, "exp", np.exp, math.exp)


def log(x):
    return _unary(x, _log_rule, "log", np.log, math.log)


def sqrt(x):
    return _unary(x, _sqrt_rule, "sqrt", np.sqrt, math.sqrt)


def sin(x):
    return _unary(x, _sin_rule, "sin", np.sin, math.sin)


def cos(x):
    return _unary(x, _cos_rule, "cos", np.cos, math.cos)


def power(x, c):
    """``x ** c`` for floats, arrays, jets and mpmath numbers."""
    return x**c


@dataclass(frozen=True, eq=False)
class Point:
    """Coordinates tagged with the chart they are expressed in."""

    coords: np.ndarray
    chart: str

    def __post_init__(self):
        arr = np.array(self.coords, dtype=float).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"non-finite coordinates {arr}")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n(self) -> int:
        return self.coords.size

    def __len__(self):
        return self.coords.size

    def __getitem__(self, i):
        return self.coords[i]

    def __iter__(self):
        return iter(self.coords)

    def __repr__(self):
        return f"Point({self.coords.tolist()}, chart={self.chart!r})"


@dataclass(frozen=True)
class PotentialModel:
    """A smooth scalar function of ``n`` coordinates with its domain.

    The domain is the open box ``lower < x < upper`` intersected with an
    optional ``constraint`` callable that returns an error message (or
    ``None`` when the point is admissible).
    """

    func: Callable[[Sequence[Any]], Any]
    names: tuple[str, ...]
    chart: str = ""
    lower: tuple[float, ...] | None = None
    upper: tuple[float, ...] | None = None
    constraint: Callable[[np.ndarray], str | None] | None = None
    name: str = "potential"

    @property
    def n(self) -> int:
        return len(self.names)

    def coords(self, x) -> np.ndarray:
        """Validate ``x`` (a Point or sequence) and return its coordinates."""
        if isinstance(x, Point):
            if self.chart and x.chart != self.chart:
                raise ChartError(f"{self.name} lives in chart {self.chart!r}, got {x.chart!r}")
            arr = np.asarray(x.coords, dtype=float)
        else:
            arr = np.asarray(x, dtype=float).reshape(-1)
        self.check(arr)
        return arr

    def check(self, arr) -> None:
        arr = np.asarray(arr, dtype=float)
        if arr.size != self.n:
            raise DomainError(f"{self.name} expects {self.n} coordinates, got {arr.size}")
        for i, v in enumerate(arr):
            if not math.isfinite(v):
                raise DomainError(f"{self.names[i]} is not finite", i)
            if self.lower is not None and not v > self.lower[i]:
                raise DomainError(f"{self.names[i]} = {v} must exceed {self.lower[i]}", i)
            if self.upper is not None and not v < self.upper[i]:
                raise DomainError(f"{self.names[i]} = {v} must stay below {self.upper[i]}", i)
        if self.constraint is not None:
            msg = self.constraint(arr)
            if msg:
                raise DomainError(f"{self.name}: {msg}")

    def __call__(self, x) -> float:
        return float(self.func(tuple(self.coords(x))))


@dataclass(frozen=True)
class Jet2:
    value: float
    grad: np.ndarray
    hess: np.ndarray


@dataclass(frozen=True)
class Jet3(Jet2):
    third: np.ndarray


@lru_cache(maxsize=None)
def _sorted_index(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    idx = np.sort(np.stack(np.indices((n, n, n))), axis=0)
    return idx[0], idx[1], idx[2]


def _symmetric_hess(h: np.ndarray) -> np.ndarray:
    return np.triu(h) + np.triu(h, 1).T


def _symmetric_third(t: np.ndarray) -> np.ndarray:
    i, j, k = _sorted_index(t.shape[0])
    return t[i, j, k]


def taylor(func: Callable, x, order: int) -> tuple:
    """Evaluate ``func`` on seeded jets; return (value, grad, hess, third)."""
    arr = np.asarray(x, dtype=float).reshape(-1)
    out = func(Jet.variables(arr, order))
    if not isinstance(out, Jet):
        out = Jet.variables(arr, order)[0]._const(float(out))
    hess = third = None
    if order >= 2:
        hess = _symmetric_hess(out.d2)
    if order >= 3:
        third = _symmetric_third(out.d3)
    return out.val, np.array(out.d1, dtype=float), hess, third


def jet2(f: PotentialModel, x) -> Jet2:
    """Value, gradient and Hessian of ``f`` at ``x``."""
    arr = f.coords(x)
    v, g, h, _ = taylor(f.func, arr, 2)
    return Jet2(v, g, h)


def jet3(f: PotentialModel, x) -> Jet3:
    """As :func:`jet2`, plus the fully symmetric third-derivative tensor."""
    arr = f.coords(x)
    v, g, h, t = taylor(f.func, arr, 3)
    return Jet3(v, g, h, t)


def fd_steps(x) -> np.ndarray:
    """Per-axis central-difference steps, ``1e-5 * max(1, |x_i|)``."""
    return FD_REL_STEP * np.maximum(1.0, np.abs(np.asarray(x, dtype=float)))


def _stencil(n: int, order: int):
    """Sorted index tuples and their signed corner offsets."""
    plan = []
    for idx in itertools.combinations_with_replacement(range(n), order):
        corners = []
        for signs in itertools.product((1, -1), repeat=order):
            m = [0] * n
            for axis, s in zip(idx, signs):
                m[axis] += s
            corners.append((tuple(m), math.prod(signs)))
        plan.append((idx, corners))
    return plan


def central_differences(
    func: Callable,
    x,
    order: int,
    *,
    check: Callable[[np.ndarray], None] | None = None,
    extended: bool = True,
    richardson: bool = True,
) -> np.ndarray:
    """Central-difference derivative tensor of ``func`` at ``x``.

    Each index contributes one symmetric difference with step ``h_i``, so a
    k-th derivative uses the 2^k corners of the displaced stencil. ``func``
    may be scalar- or array-valued; the derivative axes are appended last.
    With ``extended`` the stencil is evaluated in 40-digit arithmetic, which
    removes cancellation error and leaves only the truncation term. With
    ``richardson`` the steps h and h/2 are combined as (4 D(h/2) - D(h)) / 3,
    cancelling the O(h^2) term. Callables that cannot take mpmath numbers
    fall back to float64.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    x = np.asarray(x, dtype=float).reshape(-1)
    n = x.size
    h = fd_steps(x)
    plan = _stencil(n, order)
    offsets = {m for _, corners in plan for m, _ in corners}

    if check is not None:
        reach = max(2, order)
        probes = set(offsets)
        for i in range(n):
            for s in (reach, -reach):
                m = [0] * n
                m[i] = s
                probes.add(tuple(m))
        for m in probes:
            try:
                check(x + np.asarray(m) * h)
            except DomainError as exc:
                raise DomainError(
                    f"point too close to the domain boundary for order-{order} differences",
                    exc.index,
                ) from exc

    scales = (1.0, 0.5) if richardson else (1.0,)

    def evaluate(convert):
        return {
            (m, k): np.asarray(
                func(tuple(convert(x[i], k * h[i], m[i]) for i in range(n))), dtype=object
            )
            for m in offsets
            for k in scales
        }

    def assemble(cache, zero, scale):
        shape = next(iter(cache.values())).shape
        out = np.empty(shape + (n,) * order, dtype=float)
        for idx, corners in plan:
            est = []
            for k in scales:
                acc = np.full(shape, zero, dtype=object)
                for m, w in corners:
                    acc = acc + w * cache[(m, k)]
                est.append(acc / scale(2**order * math.prod(k * h[i] for i in idx)))
            total = (4 * est[1] - est[0]) / 3 if richardson else est[0]
            val = np.asarray(total, dtype=object).astype(float)
            for perm in set(itertools.permutations(idx)):
                out[(Ellipsis,) + perm] = val
        return out

    if extended:
        ctx = mpmath.MPContext()
        ctx.dps = EXTENDED_DPS
        try:
            cache = evaluate(lambda xi, hi, mi: ctx.mpf(xi) + mi * ctx.mpf(hi))
        except (TypeError, AttributeError):
            cache = None
        if cache is not None:
            return assemble(cache, ctx.mpf(0), ctx.mpf)
    return assemble(evaluate(lambda xi, hi, mi: xi + mi * hi), 0.0, float)


def fd_oracle(f: PotentialModel, x, order: int) -> np.ndarray:
    """Finite-difference gradient, Hessian or third-derivative tensor of ``f``.

    Independent of the jet path: only point evaluations of ``f`` are used.
    Points closer to the domain boundary than the stencil reach are
    rejected rather than differenced one-sidedly.
    """
    arr = f.coords(x)
    return central_differences(f.func, arr, order, check=f.check)
