"""Metric-field calculus: Christoffel symbols, Ricci scalar, geodesic residuals.

Nothing here assumes positive definiteness, so the indefinite Weinhold
metrics of black-hole thermodynamics go through the same code path as the
Fisher metric.

Two derivative sources are supported. A hessian-derived metric
``g = s * Hess F`` gets its first derivatives exactly from third-order jets,
and its curvature needs nothing more because the fourth-derivative terms of
a Hessian metric cancel. A closed-form metric is differentiated by central
differences in extended precision. Keeping both paths lets one check the
other.

Only the Levi-Civita connection of ``g`` is implemented. The dual affine
connections of a dually-flat manifold are flat in their own charts, but the
Levi-Civita connection of the same metric is in general curved.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .diffcalc import Point, PotentialModel, central_differences, taylor
from .errors import ChartError, DomainError, SingularMetricError

__all__ = [
    "CurvatureReport",
    "CurvatureSweep",
    "GeodesicResidual",
    "MetricField",
    "christoffel",
    "curvature_report",
    "curvature_sweep",
    "fd_along",
    "geodesic_residual",
    "ricci_scalar",
]

HESSIAN = "hessian-derived"
CLOSED = "closed-form"
DEGENERATE_COND = 1e10
DEFAULT_FLAT_TOL = 1e-5
DEFAULT_MARGIN = 0.05


@dataclass(frozen=True)
class MetricField:
    """A symmetric bilinear form g_ij(x) over an open coordinate box.

    ``lower``/``upper`` bound the domain (and the sweep grid); ``constraint``
    optionally rejects further points. For hessian-derived fields the matrix
    is ``sign`` times the Hessian of ``potential``.
    """

    names: tuple[str, ...]
    provenance: str
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    func: Callable[[Sequence[Any]], Any] | None = None
    potential: PotentialModel | None = None
    sign: float = 1.0
    chart: str = ""
    name: str = "metric"
    constraint: Callable[[np.ndarray], str | None] | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.provenance not in (HESSIAN, CLOSED):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == HESSIAN and self.potential is None:
            raise ValueError("hessian-derived metric needs a potential")
        if self.provenance == CLOSED and self.func is None:
            raise ValueError("closed-form metric needs a function")

    @classmethod
    def from_potential(
        cls,
        potential: PotentialModel,
        lower: Sequence[float],
        upper: Sequence[float],
        *,
        sign: float = 1.0,
        name: str | None = None,
    ) -> "MetricField":
        return cls(
            names=potential.names,
            provenance=HESSIAN,
            lower=tuple(lower),
            upper=tuple(upper),
            potential=potential,
            sign=sign,
            chart=potential.chart,
            name=name or f"hess({potential.name})",
            constraint=potential.constraint,
        )

    @classmethod
    def closed_form(
        cls,
        func: Callable[[Sequence[Any]], Any],
        names: Sequence[str],
        lower: Sequence[float],
        upper: Sequence[float],
        *,
        chart: str = "",
        name: str = "metric",
        constraint: Callable[[np.ndarray], str | None] | None = None,
    ) -> "MetricField":
        return cls(
            names=tuple(names),
            provenance=CLOSED,
            lower=tuple(lower),
            upper=tuple(upper),
            func=func,
            chart=chart,
            name=name,
            constraint=constraint,
        )

    @property
    def dim(self) -> int:
        return len(self.names)

    def coords(self, x) -> np.ndarray:
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
        if arr.size != self.dim:
            raise DomainError(f"{self.name} expects {self.dim} coordinates, got {arr.size}")
        for i, v in enumerate(arr):
            if not (self.lower[i] < v < self.upper[i]):
                raise DomainError(
                    f"{self.names[i]} = {v} outside ({self.lower[i]}, {self.upper[i]})", i
                )
        if self.constraint is not None:
            msg = self.constraint(arr)
            if msg:
                raise DomainError(f"{self.name}: {msg}")
        if self.potential is not None:
            self.potential.check(arr)

    def _closed(self, arr) -> np.ndarray:
        g = np.asarray(self.func(tuple(arr)), dtype=float)
        return np.triu(g) + np.triu(g, 1).T

    def __call__(self, x) -> np.ndarray:
        """The metric matrix at ``x``."""
        arr = self.coords(x)
        if self.provenance == HESSIAN:
            _, _, h, _ = taylor(self.potential.func, arr, 2)
            return self.sign * h
        return self._closed(arr)

    def derivatives(self, x, order: int = 1):
        """Return (g, dg) or (g, dg, ddg) with ``dg[i, j, k] = d_k g_ij``.

        Hessian-derived fields use jets and support only ``order=1``; the
        curvature of a Hessian metric needs no second metric derivatives.
        """
        arr = self.coords(x)
        if self.provenance == HESSIAN:
            if order != 1:
                raise ValueError("hessian-derived metrics expose first derivatives only")
            _, _, h, t = taylor(self.potential.func, arr, 3)
            return self.sign * h, self.sign * t
        g = self._closed(arr)
        dg = central_differences(self.func, arr, 1, check=self.check)
        dg = 0.5 * (dg + dg.transpose(1, 0, 2))
        if order == 1:
            return g, dg
        ddg = central_differences(self.func, arr, 2, check=self.check)
        ddg = 0.5 * (ddg + ddg.transpose(1, 0, 2, 3))
        return g, dg, ddg

    def signature(self, x=None) -> tuple[int, int]:
        """Counts of positive and negative eigenvalues (box centre by default)."""
        if x is None:
            x = self.reference_point()
        w = np.linalg.eigvalsh(self(x))
        return int(np.sum(w > 0)), int(np.sum(w < 0))

    def reference_point(self) -> np.ndarray:
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        return 0.5 * (lo + hi)

    def sweep_grid(self, grid: int = 10, margin: float = DEFAULT_MARGIN) -> np.ndarray:
        """Tensor grid over the domain box shrunk by ``margin`` on every side."""
        lo = np.asarray(self.lower, dtype=float) + margin
        hi = np.asarray(self.upper, dtype=float) - margin
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)) or np.any(lo >= hi):
            raise ValueError(f"{self.name}: sweep box must be finite and non-empty after the margin")
        axes = [np.linspace(a, b, grid) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _inverse(g: np.ndarray) -> tuple[np.ndarray, float]:
    try:
        cond = float(np.linalg.cond(g))
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError(f"metric is singular: {exc}") from exc
    if not np.isfinite(cond) or not np.all(np.isfinite(ginv)):
        raise SingularMetricError("metric is singular")
    return ginv, cond


def _christoffel_from(ginv: np.ndarray, dg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # first kind: G[a, j, k] = 1/2 (d_j g_ak + d_k g_ja - d_a g_jk)
    first = 0.5 * (
        dg.transpose(0, 2, 1) + dg.transpose(1, 0, 2) - dg.transpose(2, 0, 1)
    )
    gam = np.einsum("ia,ajk->ijk", ginv, first)
    gam = 0.5 * (gam + gam.transpose(0, 2, 1))
    return gam, first


def christoffel(g: MetricField, x) -> np.ndarray:
    """Levi-Civita symbols ``gamma[i, j, k] = Gamma^i_{jk}``, symmetric in (j, k)."""
    metric, dg = g.derivatives(x, 1)
    ginv, _ = _inverse(metric)
    return _christoffel_from(ginv, dg)[0]


def _ricci_tensor(g: MetricField, x) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    if g.provenance == HESSIAN:
        metric, dg = g.derivatives(x, 1)
        ginv, cond = _inverse(metric)
        gam, _ = _christoffel_from(ginv, dg)
        # the fourth-derivative terms of a Hessian metric cancel in the Riemann tensor
        ricci = np.einsum("ilm,mij->jl", gam, gam) - np.einsum("iim,mlj->jl", gam, gam)
        return ricci, ginv, gam, cond
    metric, dg, ddg = g.derivatives(x, 2)
    ginv, cond = _inverse(metric)
    gam, first = _christoffel_from(ginv, dg)
    # d_k of the first-kind symbols, ddg[a, b, c, d] = d_c d_d g_ab
    dfirst = 0.5 * (
        ddg.transpose(0, 2, 1, 3) + ddg.transpose(1, 0, 2, 3) - ddg.transpose(2, 0, 1, 3)
    )
    dginv = -np.einsum("ib,bck,ca->iak", ginv, dg, ginv)
    # dgam[i, j, l, k] = d_k Gamma^i_{jl}
    dgam = np.einsum("iak,ajl->ijlk", dginv, first) + np.einsum("ia,ajlk->ijlk", ginv, dfirst)
    ricci = (
        np.einsum("ilji->jl", dgam)
        - np.einsum("iijl->jl", dgam)
        + np.einsum("iim,mlj->jl", gam, gam)
        - np.einsum("ilm,mij->jl", gam, gam)
    )
    return ricci, ginv, gam, cond


def ricci_scalar(g: MetricField, x) -> float:
    """Scalar curvature ``R = g^{jk} R^i_{jik}``."""
    ricci, ginv, _, _ = _ricci_tensor(g, x)
    return float(np.einsum("jl,jl->", ginv, ricci))


@dataclass(frozen=True)
class CurvatureReport:
    point: Point
    christoffel: np.ndarray
    ricci_scalar: float
    flat: bool
    tol: float
    condition: float
    degenerate: bool


def curvature_report(g: MetricField, x, tol: float = DEFAULT_FLAT_TOL) -> CurvatureReport:
    arr = g.coords(x)
    ricci, ginv, gam, cond = _ricci_tensor(g, arr)
    r = float(np.einsum("jl,jl->", ginv, ricci))
    return CurvatureReport(
        point=Point(arr, g.chart or "x"),
        christoffel=gam,
        ricci_scalar=r,
        flat=abs(r) <= tol,
        tol=tol,
        condition=cond,
        degenerate=cond > DEGENERATE_COND,
    )


@dataclass(frozen=True)
class CurvatureSweep:
    metric: str
    points: np.ndarray
    values: np.ndarray
    conditions: np.ndarray
    skipped: int
    signature: tuple[int, int]
    signature_violations: int
    tol: float

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else float("nan")

    @property
    def flat(self) -> bool:
        return self.values.size > 0 and self.max_abs <= self.tol


def curvature_sweep(
    g: MetricField,
    grid: int = 10,
    margin: float = DEFAULT_MARGIN,
    tol: float = DEFAULT_FLAT_TOL,
) -> CurvatureSweep:
    """Ricci scalar on an interior grid; inadmissible or singular points are counted, not fatal."""
    pts = g.sweep_grid(grid, margin)
    reference = None
    kept, values, conds = [], [], []
    skipped = violations = 0
    for p in pts:
        try:
            rep = curvature_report(g, p, tol)
            sig = g.signature(p)
        except (DomainError, SingularMetricError):
            skipped += 1
            continue
        if reference is None:
            reference = sig
        elif sig != reference:
            violations += 1
        kept.append(p)
        values.append(rep.ricci_scalar)
        conds.append(rep.condition)
    return CurvatureSweep(
        metric=g.name,
        points=np.asarray(kept).reshape(-1, g.dim),
        values=np.asarray(values),
        conditions=np.asarray(conds),
        skipped=skipped,
        signature=reference or (0, 0),
        signature_violations=violations,
        tol=tol,
    )


def fd_along(values: np.ndarray, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Fourth-order first and second derivatives at the interior samples.

    Returns arrays for samples ``2 .. N-3`` (five-point stencils).
    """
    x = np.asarray(values, dtype=float)
    if x.shape[0] < 5:
        raise ValueError("need at least 5 samples for five-point differences")
    xm2, xm1, x0, xp1, xp2 = x[:-4], x[1:-3], x[2:-2], x[3:-1], x[4:]
    d1 = (-xp2 + 8.0 * xp1 - 8.0 * xm1 + xm2) / (12.0 * step)
    d2 = (-xp2 + 16.0 * xp1 - 30.0 * x0 + 16.0 * xm1 - xm2) / (12.0 * step**2)
    return d1, d2


def uniform_step(params: np.ndarray) -> float:
    params = np.asarray(params, dtype=float)
    if params.size < 5:
        raise ValueError("curve has fewer than 5 samples")
    steps = np.diff(params)
    h = float(steps.mean())
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError("curve samples are not uniformly spaced")
    return h


@dataclass(frozen=True)
class GeodesicResidual:
    affine: float
    non_affine: float


def geodesic_residual(g: MetricField, curve, coords=None) -> GeodesicResidual:
    """Geodesic-equation residuals along a sampled curve.

    ``curve`` is either a parameter array (with ``coords`` given) or a
    trajectory object exposing ``params`` and ``chart_series(chart)``. The
    affine residual is ``|x'' + Gamma x' x'|`` and the non-affine one is
    ``|x'' + x'|``, the form taken by the linear gradient flows.
    """
    if coords is None:
        params = np.asarray(curve.params)
        coords = curve.chart_series(g.chart)
    else:
        params = np.asarray(curve)
    coords = np.asarray(coords, dtype=float)
    h = uniform_step(params)
    d1, d2 = fd_along(coords, h)
    affine = 0.0
    for x, v, a in zip(coords[2:-2], d1, d2):
        gam = christoffel(g, x)
        res = a + np.einsum("ijk,j,k->i", gam, v, v)
        affine = max(affine, float(np.max(np.abs(res))))
    non_affine = float(np.max(np.abs(d2 + d1))) if d1.size else 0.0
    return GeodesicResidual(affine=affine, non_affine=non_affine)
