"""The acceptance suite: twelve criteria, each a set of measured quantities.

Every criterion returns a :class:`CriterionResult` holding its measurements
and the tolerances they were judged against. Tolerances live in
:data:`TOLERANCES` and may be overridden by name. Measurements flagged
``informational`` are reported but do not affect the verdict.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .canonical import canonical_swap, dual_flow_residual
from .diffcalc import Point, fd_oracle, taylor
from .dually_flat import ETA, THETA, duality_residual, eta_from_theta, legendre_residual, theta_from_eta
from .flows import (
    FlowSpec,
    conformal_factor,
    conserved_products,
    integrate,
    integrate_constraint,
)
from .models import (
    C_STAR,
    C_STAR_DEFORMED,
    MODELS,
    POTENTIALS,
    decay_solution_check,
    fisher_metric,
    gaussian_gauge,
    gaussian_hessian_metric,
    gaussian_model,
    kerr_model,
    pushforward_dual_vars,
    rn_model,
)
from .tensor import curvature_sweep

__all__ = [
    "CRITERIA",
    "CriterionResult",
    "Measurement",
    "Report",
    "TOLERANCES",
    "resolve_tolerances",
    "run_acceptance",
    "run_criterion",
]

PAPER = "paper"
DERIVED = "derived"
TRIVIAL = "trivial"

TOLERANCES: dict[str, float] = {
    "c_star": 1e-10,
    "c_star_deformed": 1e-10,
    "flow_sigma": 1e-6,
    "flow_mu_drift": 1e-10,
    "flow_decay": 1e-6,
    "deformed_flow": 1e-5,
    "conservation": 1e-6,
    "constraint": 1e-6,
    "roundtrip": 1e-10,
    "hessian_product": 1e-8,
    "legendre": 1e-8,
    "flat": 1e-5,
    "gaussian_ricci": 1e-4,
    "rn_decay_s": 1e-6,
    "rn_decay_u": 1e-8,
    "rn_ratio": 1e-8,
    "pushforward": 0.0,
    "dual_flow": 1e-5,
    "swap": 0.0,
    "fd_order12": 1e-6,
    "fd_order3": 1e-4,
    "rk4_ratio_low": 12.0,
    "rk4_ratio_high": 20.0,
}

# wall-clock budgets in seconds, by criterion number
BUDGETS: dict[int, float] = {1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0, 8: 10.0}

GAUSSIAN_BOX = ((-2.0, 0.2), (2.0, 3.0))
CONSERVATION_STARTS = ((0.0, 1.0), (0.2, 1.5), (-0.3, 2.0))
DUAL_FLOW_RUNS = (((1.0, 1.0), 0.5), ((0.0, 1.0), 2.0), ((0.3, 2.0), 1.0))


@dataclass(frozen=True)
class Measurement:
    """One measured quantity; ``high`` is the tolerance and ``low`` an optional floor."""

    name: str
    value: float
    high: float
    citation: str
    low: float | None = None
    informational: bool = False
    note: str = ""

    @property
    def passed(self) -> bool:
        if not math.isfinite(self.value):
            return False
        if self.low is not None and self.value < self.low:
            return False
        return self.value <= self.high

    def describe(self) -> str:
        bound = f"[{self.low:g}, {self.high:g}]" if self.low is not None else f"<= {self.high:g}"
        tag = " (info)" if self.informational else ""
        verdict = "ok" if self.passed else "FAIL"
        text = f"{self.name}={self.value:.3e} {bound} {verdict}{tag}"
        return f"{text} ({self.note})" if self.note else text


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    measurements: tuple[Measurement, ...]
    seconds: float
    budget: float | None = None
    error: str | None = None

    @property
    def status(self) -> str:
        if self.error is not None:
            return "fail"
        if self.budget is not None and self.seconds > self.budget:
            return "fail"
        ok = all(m.passed for m in self.measurements if not m.informational)
        return "pass" if ok else "fail"

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self, timing: bool = True) -> str:
        """One-line verdict; without ``timing`` the text is reproducible byte for byte."""
        head = f"[{self.status.upper()}] criterion {self.number:2d} {self.title}"
        tail = ""
        if timing:
            tail = f" ({self.seconds:.2f}s" + (f" / budget {self.budget:g}s)" if self.budget else ")")
        if self.error is not None:
            return f"{head}: error: {self.error}{tail}"
        body = "; ".join(m.describe() for m in self.measurements)
        return f"{head}: {body}{tail}"

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "criterion": self.number,
            "title": self.title,
            "status": self.status,
            "budget": self.budget,
            "error": self.error,
            "checks": [
                {
                    "name": m.name,
                    "status": "pass" if m.passed else "fail",
                    "value": m.value,
                    "tolerance": m.high,
                    "floor": m.low,
                    "citation": m.citation,
                    "informational": m.informational,
                    "note": m.note,
                }
                for m in self.measurements
            ],
        }
        if timing:
            out["seconds"] = self.seconds
        return out


@dataclass(frozen=True)
class Report:
    results: tuple[CriterionResult, ...]
    tolerances: Mapping[str, float] = field(default_factory=dict)
    seed: int = 42

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def text(self, timing: bool = True) -> str:
        lines = [r.line(timing) for r in self.results]
        n_pass = sum(r.passed for r in self.results)
        lines.append(f"{n_pass}/{len(self.results)} criteria passed")
        return "\n".join(lines)

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "seed": self.seed,
            "passed": self.passed,
            "tolerances": dict(self.tolerances),
            "criteria": [r.to_dict(timing) for r in self.results],
        }


def resolve_tolerances(overrides: Mapping[str, float] | None = None) -> dict[str, float]:
    tol = dict(TOLERANCES)
    for name, value in (overrides or {}).items():
        if name not in tol:
            raise KeyError(f"unknown tolerance {name!r}; known: {', '.join(sorted(tol))}")
        value = float(value)
        if not math.isfinite(value) or value < 0.0:
            raise ValueError(f"tolerance {name} must be a non-negative number, got {value}")
        tol[name] = value
    return tol


def _gaussian_points(rng: np.random.Generator, count: int = 100) -> np.ndarray:
    lo, hi = GAUSSIAN_BOX
    return rng.uniform(lo, hi, size=(count, 2))


def _conformal_check(tol, rng, deformed: bool) -> list[Measurement]:
    m = gaussian_model()
    spec = FlowSpec(m, ETA, gaussian_gauge() if deformed else None)
    target = C_STAR_DEFORMED if deformed else C_STAR
    worst = 0.0
    for p in _gaussian_points(rng):
        worst = max(worst, abs(conformal_factor(spec, m.from_params(p, ETA)) - target))
    name = "c_star_deformed" if deformed else "c_star"
    return [Measurement(f"max|C-{target:.6f}|", worst, tol[name], PAPER, note="100 points")]


def _criterion_1(tol, rng):
    return _conformal_check(tol, rng, deformed=False)


def _criterion_2(tol, rng):
    return _conformal_check(tol, rng, deformed=True)


def _gaussian_flow(steps: int = 200, t_end: float = 2.0):
    m = gaussian_model()
    return integrate(FlowSpec(m, ETA), m.from_params([1.0, 1.0], ETA), t_end, steps)


def _params_series(traj):
    m = traj.spec.model
    return np.array([m.params.params(e) for e in traj.eta])


def _criterion_3(tol, rng):
    traj = _gaussian_flow()
    params = _params_series(traj)
    theta = traj.theta
    decay = np.max(np.abs(theta - theta[0] * np.exp(-traj.params)[:, None]))
    return [
        Measurement("|sigma(2)-e|", abs(params[-1, 1] - math.e), tol["flow_sigma"], PAPER),
        Measurement("mu_drift", float(np.max(np.abs(params[:, 0] - 1.0))), tol["flow_mu_drift"], PAPER),
        Measurement("theta_decay", float(decay), tol["flow_decay"], PAPER),
    ]


def _criterion_4(tol, rng):
    m = gaussian_model()
    traj = integrate(FlowSpec(m, ETA, gaussian_gauge()), m.from_params([1.0, 1.0], ETA), 1.0, 200)
    mu, sigma = _params_series(traj)[-1]
    half = math.exp(0.5)
    return [
        Measurement("|sigma(1)-e^(1/2)|", abs(sigma - half), tol["deformed_flow"], DERIVED),
        Measurement("|mu(1)-(3-2e^(1/2))|", abs(mu - (1.0 + 2.0 * (1.0 - half))), tol["deformed_flow"], DERIVED),
    ]


def _criterion_5(tol, rng):
    m = gaussian_model()
    out = []
    for start in CONSERVATION_STARTS:
        traj = integrate(FlowSpec(m, ETA), m.from_params(start, ETA), 2.0, 200)
        drift = conserved_products(traj)
        note = f"covered t<={drift.covered_until:g}, {drift.samples} samples"
        out.append(Measurement(f"K_drift{start}", drift.max_drift, tol["conservation"], PAPER, note=note))
    return out


def _criterion_6(tol, rng):
    m = gaussian_model()
    out = []
    for label, gauge, lam in (("undeformed", None, 1.0), ("deformed", gaussian_gauge(), 1.5)):
        traj = integrate_constraint(FlowSpec(m, ETA, gauge), m.from_params([1.0, 1.0], ETA), lam, 200)
        note = "complete" if traj.complete else f"stopped at step {traj.exit_step}"
        worst = float(np.max(np.abs(traj.constraint - 1.0)))
        out.append(Measurement(f"max|Phi-1| {label}", worst, tol["constraint"], PAPER, note=note))
    return out


def _criterion_7(tol, rng):
    out = []
    for name, entry in MODELS.items():
        m = entry.factory()
        rt = hp = lg = 0.0
        for theta in entry.theta_points(rng, 100):
            eta = eta_from_theta(m, theta)
            back = theta_from_eta(m, eta)
            scale = max(1.0, float(np.max(np.abs(theta.coords))))
            rt = max(rt, float(np.max(np.abs(back.coords - theta.coords))) / scale)
            hp = max(hp, duality_residual(m, theta))
            lg = max(lg, legendre_residual(m, theta))
        out += [
            Measurement(f"{name}.roundtrip", rt, tol["roundtrip"], DERIVED),
            Measurement(f"{name}.hessian_product", hp, tol["hessian_product"], DERIVED),
            Measurement(f"{name}.legendre", lg, tol["legendre"], DERIVED),
        ]
    return out


def _criterion_8(tol, rng):
    flat = tol["flat"]
    out = []
    for label, metric in (
        ("rn_ruppeiner", rn_model().ruppeiner),
        ("rn_weinhold", rn_model().weinhold),
        ("kerr_outer_weinhold", kerr_model(1).weinhold),
    ):
        sweep = curvature_sweep(metric, 10, tol=flat)
        note = f"{sweep.values.size} points, {sweep.skipped} skipped"
        out.append(Measurement(f"{label}.max|R|", sweep.max_abs, flat, PAPER, note=note))
    sweep = curvature_sweep(fisher_metric(), 10)
    out.append(
        Measurement(
            "gaussian_fisher.max|R+1|",
            float(np.max(np.abs(sweep.values + 1.0))),
            tol["gaussian_ricci"],
            DERIVED,
            note=f"{sweep.values.size} points",
        )
    )
    extra = curvature_sweep(kerr_model(1).mass_hessian, 10, tol=flat)
    out.append(
        Measurement(
            "kerr_mass_hessian.max|R|", extra.max_abs, flat, DERIVED, informational=True,
            note="Hessian of M(S,J)",
        )
    )
    hess = curvature_sweep(gaussian_hessian_metric(), 10)
    out.append(
        Measurement(
            "gaussian_hessian.max|R+1|", float(np.max(np.abs(hess.values + 1.0))), tol["gaussian_ricci"],
            DERIVED, informational=True, note="jet path on the eta chart",
        )
    )
    return out


def _criterion_9(tol, rng):
    rn = rn_model()
    rep = decay_solution_check(rn, [1.0, 0.0], 1.0, samples=50)
    s_err = float(np.max(np.abs(rep.states[:, 0] - np.exp(-2.0 * rep.times))))
    u_err = float(np.max(np.abs(rep.states[:, 1])))
    ratio = float(np.max(np.abs(rep.ratio - rep.ratio[0])))
    tilde = pushforward_dual_vars(rn.variable_map_jacobian(1.0, 0.0), rn.dual_coords(1.0, 0.0))
    note = "complete" if rep.complete else rep.message
    return [
        Measurement("|S(t)-e^(-2t)|", s_err, tol["rn_decay_s"], DERIVED, note=note),
        Measurement("max|u(t)|", u_err, tol["rn_decay_u"], DERIVED),
        Measurement("ratio_drift", ratio, tol["rn_ratio"], PAPER),
        Measurement("|theta~S-2|", abs(float(tilde[0]) - 2.0), tol["pushforward"], PAPER),
        Measurement("newton_residual", rep.max_residual, tol["rn_decay_s"], DERIVED, informational=True),
    ]


def _criterion_10(tol, rng):
    m = gaussian_model()
    out = []
    for start, t_end in DUAL_FLOW_RUNS:
        traj = integrate(FlowSpec(m, THETA), m.from_params(start, THETA), t_end, 200)
        note = f"t in [0, {traj.params[-1]:g}]"
        out.append(Measurement(f"dual_flow{start}", dual_flow_residual(m, traj), tol["dual_flow"], PAPER, note=note))
    worst = 0.0
    for p in _gaussian_points(rng):
        theta = m.from_params(p, THETA)
        eta = eta_from_theta(m, theta)
        a, b = canonical_swap(*canonical_swap(theta.coords, eta.coords))
        worst = max(worst, float(np.max(np.abs(a + theta.coords))), float(np.max(np.abs(b + eta.coords))))
    out.append(Measurement("swap_twice+reflection", worst, tol["swap"], TRIVIAL, note="100 points"))
    return out


def _criterion_11(tol, rng):
    out = []
    for name, entry in POTENTIALS.items():
        pot = entry.factory()
        worst = [0.0, 0.0, 0.0]
        for _ in range(100):
            x = pot.coords(entry.sample(rng))
            _, g, h, t = taylor(pot.func, x, 3)
            for order, jet in ((1, g), (2, h), (3, t)):
                fd = fd_oracle(pot, x, order)
                rel = float(np.max(np.abs(fd - jet))) / max(1.0, float(np.max(np.abs(jet))))
                worst[order - 1] = max(worst[order - 1], rel)
        out.append(Measurement(f"{name}.order12", max(worst[:2]), tol["fd_order12"], DERIVED))
        out.append(Measurement(f"{name}.order3", worst[2], tol["fd_order3"], DERIVED))
    return out


def _criterion_12(tol, rng):
    errors = []
    for steps in (200, 400):
        params = _params_series(_gaussian_flow(steps))
        errors.append(abs(params[-1, 1] - math.e))
    ratio = errors[0] / errors[1] if errors[1] > 0 else float("inf")
    note = f"errors {errors[0]:.3e}, {errors[1]:.3e}"
    return [
        Measurement(
            "error_ratio", ratio, tol["rk4_ratio_high"], DERIVED, low=tol["rk4_ratio_low"], note=note
        )
    ]


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("gaussian conformal factor", _criterion_1),
    2: ("gaussian deformed conformal factor", _criterion_2),
    3: ("gaussian flow", _criterion_3),
    4: ("deformed gaussian flow", _criterion_4),
    5: ("conserved products", _criterion_5),
    6: ("constraint preservation", _criterion_6),
    7: ("legendre duality suite", _criterion_7),
    8: ("curvature certification", _criterion_8),
    9: ("rn decay solutions", _criterion_9),
    10: ("canonical duality", _criterion_10),
    11: ("differentiation oracle", _criterion_11),
    12: ("rk4 convergence order", _criterion_12),
}


def run_criterion(
    number: int, tolerances: Mapping[str, float] | None = None, seed: int = 42
) -> CriterionResult:
    """Run one criterion with its own seeded generator (so results do not depend on order)."""
    if number not in CRITERIA:
        raise KeyError(f"no criterion {number}")
    title, fn = CRITERIA[number]
    tol = resolve_tolerances(tolerances)
    rng = np.random.default_rng([seed, number])
    start = time.perf_counter()
    error = None
    try:
        measurements = tuple(fn(tol, rng))
    except Exception as exc:  # a crashing check is reported as a failure, not raised
        measurements, error = (), f"{type(exc).__name__}: {exc}"
    return CriterionResult(
        number=number,
        title=title,
        measurements=measurements,
        seconds=time.perf_counter() - start,
        budget=BUDGETS.get(number),
        error=error,
    )


def run_acceptance(
    tolerances: Mapping[str, float] | None = None,
    seed: int = 42,
    only: Iterable[int] | None = None,
) -> Report:
    tol = resolve_tolerances(tolerances)
    numbers = sorted(CRITERIA) if only is None else list(only)
    results = tuple(run_criterion(n, tol, seed) for n in numbers)
    return Report(results=results, tolerances=tol, seed=seed)
