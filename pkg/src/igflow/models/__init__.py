"""Built-in models and a registry used by the command line and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..diffcalc import Point, PotentialModel
from ..dually_flat import ETA, THETA, DuallyFlatModel, to_chart
from ..flows import GaugeField, zero_gauge
from ..tensor import MetricField
from .blackholes import (
    DecayReport,
    KerrModel,
    RNModel,
    decay_solution_check,
    kerr_model,
    pushforward_dual_vars,
    rn_model,
)
from .flat_family import (
    FORMS,
    FlatFamilySpec,
    flat_family_dual_vars,
    flat_family_metric,
    flat_family_metric_field,
    flat_family_potential,
    flat_family_pullback,
)
from .gaussian import (
    C_STAR,
    C_STAR_DEFORMED,
    fisher_metric,
    gaussian_eta,
    gaussian_gauge,
    gaussian_hessian_metric,
    gaussian_inverse_metric_derivatives,
    gaussian_inverse_metric_eta,
    gaussian_metric_eta,
    gaussian_model,
    gaussian_theta,
    quadratic_model,
)

__all__ = [
    "C_STAR",
    "C_STAR_DEFORMED",
    "DecayReport",
    "FORMS",
    "FlatFamilySpec",
    "GAUGES",
    "KerrModel",
    "METRICS",
    "MODELS",
    "MetricEntry",
    "ModelEntry",
    "POTENTIALS",
    "PotentialEntry",
    "RNModel",
    "decay_solution_check",
    "fisher_metric",
    "flat_family_dual_vars",
    "flat_family_metric",
    "flat_family_metric_field",
    "flat_family_potential",
    "flat_family_pullback",
    "gaussian_eta",
    "gaussian_gauge",
    "gaussian_hessian_metric",
    "gaussian_inverse_metric_derivatives",
    "gaussian_inverse_metric_eta",
    "gaussian_metric_eta",
    "gaussian_model",
    "gaussian_theta",
    "get_gauge",
    "get_metric",
    "get_model",
    "kerr_model",
    "pushforward_dual_vars",
    "quadratic_model",
    "rn_model",
    "square_profile",
]

Sampler = Callable[[np.random.Generator], np.ndarray]


@dataclass(frozen=True)
class ModelEntry:
    """A dually-flat model with a sampler of interior parameter points."""

    factory: Callable[..., DuallyFlatModel]
    sample: Sampler
    description: str

    def theta_points(self, rng: np.random.Generator, count: int) -> list[Point]:
        m = self.factory()
        out = []
        for _ in range(count):
            eta = Point(m.params.eta(self.sample(rng)), ETA)
            out.append(to_chart(m, eta, THETA))
        return out


@dataclass(frozen=True)
class MetricEntry:
    """A metric field with its expected curvature (None when it should be flat)."""

    factory: Callable[[], MetricField]
    expected_ricci: float | None
    description: str


@dataclass(frozen=True)
class PotentialEntry:
    factory: Callable[[], PotentialModel]
    sample: Sampler


def square_profile() -> FlatFamilySpec:
    """f = 1 + sigma^2 with b = -1, the flat Ruppeiner case."""
    return FlatFamilySpec(
        a=2.0, b=-1.0, f=lambda s: 1 + s * s, df=lambda s: 2 * s, d2f=lambda s: 2 + 0 * s,
        name="flat_family_square",
    )


def _gaussian_params(rng):
    return np.array([rng.uniform(-2.0, 2.0), rng.uniform(0.2, 3.0)])


def _kerr_params(rng):
    # |sigma| >= 0.1 keeps inner-branch samples away from its degenerate line
    s = rng.uniform(0.1, 0.9) * rng.choice([-1.0, 1.0])
    return np.array([rng.uniform(0.3, 2.0), s])


def _rn_params(rng):
    m = rng.uniform(0.3, 2.0)
    return np.array([m, m * rng.uniform(-0.8, 0.8)])


MODELS: dict[str, ModelEntry] = {
    "gaussian": ModelEntry(gaussian_model, _gaussian_params, "univariate normal, closed-form potentials"),
    "quadratic": ModelEntry(
        quadratic_model, lambda rng: rng.uniform(-2.0, 2.0, size=2), "self-dual psi = |theta|^2/2"
    ),
    "kerr_outer": ModelEntry(
        lambda **kw: kerr_model(1, **kw).dually_flat, _kerr_params, "Kerr entropy on (M, J), outer horizon"
    ),
    "kerr_inner": ModelEntry(
        lambda **kw: kerr_model(-1, **kw).dually_flat, _kerr_params, "Kerr entropy on (M, J), inner horizon"
    ),
    "rn": ModelEntry(
        lambda **kw: rn_model(**kw).dually_flat, _rn_params, "Reissner-Nordstrom entropy on (M, Q)"
    ),
}

GAUGES: dict[str, Callable[[DuallyFlatModel, str], GaugeField]] = {
    "zero": lambda m, chart: zero_gauge(m.n, chart),
    "gaussian_inv_sigma": lambda m, chart: gaussian_gauge(),
}

METRICS: dict[str, MetricEntry] = {
    "gaussian_fisher": MetricEntry(fisher_metric, -1.0, "Fisher metric on (mu, sigma)"),
    "gaussian_hessian": MetricEntry(gaussian_hessian_metric, -1.0, "Hessian of psi_star on eta"),
    "kerr_outer_weinhold": MetricEntry(lambda: kerr_model(1).weinhold, None, "printed Weinhold form, outer"),
    "kerr_inner_weinhold": MetricEntry(lambda: kerr_model(-1).weinhold, None, "printed Weinhold form, inner"),
    "kerr_mass_hessian": MetricEntry(lambda: kerr_model(1).mass_hessian, None, "Hessian of M(S, J)"),
    "rn_weinhold": MetricEntry(lambda: rn_model().weinhold, None, "printed Weinhold form on (S, u)"),
    "rn_ruppeiner": MetricEntry(lambda: rn_model().ruppeiner, None, "printed Ruppeiner form on (S, u)"),
    "rn_entropy_hessian": MetricEntry(lambda: rn_model().entropy_hessian, None, "minus Hessian of S(M, Q)"),
    "flat_family_ruppeiner": MetricEntry(
        lambda: flat_family_metric_field(square_profile(), "ruppeiner", (0.2, -1.0), (2.0, 1.0)),
        None,
        "flat family, b = -1, on (psi, sigma)",
    ),
}


def _sample_box(lo, hi):
    return lambda rng: rng.uniform(lo, hi)


def _kerr_mj(rng):
    p = _kerr_params(rng)
    return np.array([p[0], p[1] * p[0] ** 2])


def _kerr_theta(branch):
    k = kerr_model(branch)

    def sample(rng):
        m, s = _kerr_params(rng)
        return np.array(k.dual_coords(m, s), dtype=float)

    return sample


def _kerr_sj(rng):
    k = kerr_model(1)
    m, s = _kerr_params(rng)
    j = s * m * m
    return np.array([float(k.entropy(m, j)), j])


def _rn_theta(rng):
    m, q = _rn_params(rng)
    s = float(RNModel.entropy(m, q))
    return np.array(RNModel.dual_coords(s, q / np.sqrt(s)), dtype=float)


def _rn_sq(rng):
    m, q = _rn_params(rng)
    return np.array([float(RNModel.entropy(m, q)), q])


def _gaussian_eta(rng):
    return gaussian_eta(*_gaussian_params(rng))


def _gaussian_theta(rng):
    return gaussian_theta(*_gaussian_params(rng))


POTENTIALS: dict[str, PotentialEntry] = {
    "gaussian_psi": PotentialEntry(lambda: gaussian_model().psi, _gaussian_theta),
    "gaussian_psi_star": PotentialEntry(lambda: gaussian_model().psi_star, _gaussian_eta),
    "quadratic": PotentialEntry(lambda: quadratic_model().psi, _sample_box([-2, -2], [2, 2])),
    "kerr_outer_entropy": PotentialEntry(lambda: kerr_model(1).entropy_potential(), _kerr_mj),
    "kerr_inner_entropy": PotentialEntry(lambda: kerr_model(-1).entropy_potential(), _kerr_mj),
    "kerr_outer_conjugate": PotentialEntry(lambda: kerr_model(1).conjugate_potential(), _kerr_theta(1)),
    "kerr_inner_conjugate": PotentialEntry(lambda: kerr_model(-1).conjugate_potential(), _kerr_theta(-1)),
    "kerr_mass": PotentialEntry(lambda: kerr_model(1).mass_potential(), _kerr_sj),
    "rn_entropy": PotentialEntry(lambda: rn_model().entropy_potential(), lambda rng: np.array(_rn_params(rng))),
    "rn_conjugate": PotentialEntry(lambda: rn_model().conjugate_potential(), _rn_theta),
    "rn_mass": PotentialEntry(lambda: rn_model().mass_potential(), _rn_sq),
    "flat_family_square": PotentialEntry(
        lambda: flat_family_potential(square_profile()), _sample_box([0.3, -1.0], [2.0, 1.0])
    ),
}


def _lookup(table: dict, kind: str, name: str):
    try:
        return table[name]
    except KeyError:
        known = ", ".join(sorted(table))
        raise KeyError(f"unknown {kind} {name!r}; known: {known}") from None


def get_model(name: str, **params) -> DuallyFlatModel:
    return _lookup(MODELS, "model", name).factory(**params)


def get_gauge(name: str, model: DuallyFlatModel, chart: str) -> GaugeField:
    return _lookup(GAUGES, "gauge", name)(model, chart)


def get_metric(name: str) -> MetricField:
    return _lookup(METRICS, "metric", name).factory()
