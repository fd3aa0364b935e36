"""Experiment configuration: a YAML tree validated into frozen dataclasses.

Example::

    model:
      name: gaussian
    flow:
      chart: eta            # theta (ascent) or eta (descent)
      gauge: zero           # or gaussian_inv_sigma
      t_end: 2.0
      steps: 200
    sweeps:
      points: [[1.0, 1.0], [0.0, 1.0]]   # in the model's parameter chart
      random: {count: 2, lower: [-1.0, 0.5], upper: [1.0, 2.0]}
    curvature:
      metric: rn_ruppeiner
      grid: 10
    outputs:
      directory: out
      formats: [csv]
    tolerances:
      flat: 1.0e-5
    seed: 42

Every error names the offending field; YAML syntax errors carry the line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .acceptance import TOLERANCES
from .dually_flat import ETA, THETA
from .errors import ConfigError
from .flows import MIN_STEPS
from .models import GAUGES, METRICS, MODELS

__all__ = [
    "CurvatureConfig",
    "ExperimentConfig",
    "FlowConfig",
    "ModelConfig",
    "OutputConfig",
    "SweepConfig",
    "default_config",
    "load_config",
    "parse_config",
]

FORMATS = ("csv", "json")
DEFAULT_SEED = 42
TOP_LEVEL = {"model", "flow", "sweeps", "curvature", "outputs", "tolerances", "seed"}


@dataclass(frozen=True)
class ModelConfig:
    name: str = "gaussian"
    params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class FlowConfig:
    chart: str = ETA
    gauge: str | None = None
    t_end: float = 2.0
    steps: int = 200


@dataclass(frozen=True)
class SweepConfig:
    points: tuple[tuple[float, ...], ...] = ((1.0, 1.0),)
    random_count: int = 0
    random_lower: tuple[float, ...] = ()
    random_upper: tuple[float, ...] = ()

    def initial_points(self, seed: int) -> list[np.ndarray]:
        """Listed points first, then ``random_count`` seeded draws from the box."""
        out = [np.array(p, dtype=float) for p in self.points]
        if self.random_count:
            rng = np.random.default_rng(seed)
            draws = rng.uniform(self.random_lower, self.random_upper, size=(self.random_count, len(self.random_lower)))
            out.extend(np.array(d) for d in draws)
        return out


@dataclass(frozen=True)
class CurvatureConfig:
    metric: str = "rn_ruppeiner"
    grid: int = 10
    margin: float = 0.05


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    flow: FlowConfig = field(default_factory=FlowConfig)
    sweeps: SweepConfig = field(default_factory=SweepConfig)
    curvature: CurvatureConfig = field(default_factory=CurvatureConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)
    tolerances: Mapping[str, float] = field(default_factory=dict)
    seed: int = DEFAULT_SEED


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _section(raw: Mapping, key: str, allowed: set[str]) -> dict:
    value = raw.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"{key}: expected a mapping, got {type(value).__name__}")
    unknown = set(value) - allowed
    if unknown:
        raise ConfigError(f"{key}: unknown field(s) {', '.join(sorted(map(str, unknown)))}")
    return dict(value)


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return value


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _vector(value, where: str, n: int | None = None) -> tuple[float, ...]:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{where}: expected a list of numbers, got {value!r}")
    vec = tuple(_number(v, f"{where}[{i}]") for i, v in enumerate(value))
    if n is not None and len(vec) != n:
        raise ConfigError(f"{where}: expected {n} entries, got {len(vec)}")
    return vec


def _parse_model(raw) -> ModelConfig:
    sec = _section(raw, "model", {"name", "params"})
    name = sec.get("name", "gaussian")
    if name not in MODELS:
        raise ConfigError(f"model.name: unknown model {name!r}; known: {', '.join(sorted(MODELS))}")
    params = sec.get("params") or {}
    if not isinstance(params, Mapping):
        raise ConfigError("model.params: expected a mapping")
    try:
        MODELS[name].factory(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model.params: {exc}") from exc
    return ModelConfig(name=name, params=dict(params))


def _parse_flow(raw) -> FlowConfig:
    sec = _section(raw, "flow", {"chart", "gauge", "t_end", "steps"})
    chart = sec.get("chart", ETA)
    if chart not in (THETA, ETA):
        raise ConfigError(f"flow.chart: must be {THETA!r} or {ETA!r}, got {chart!r}")
    gauge = sec.get("gauge")
    if isinstance(gauge, Mapping):
        gauge = gauge.get("name")
    if gauge == "zero":
        gauge = None
    if gauge is not None and gauge not in GAUGES:
        raise ConfigError(f"flow.gauge: unknown gauge {gauge!r}; known: {', '.join(sorted(GAUGES))}")
    t_end = _number(sec.get("t_end", 2.0), "flow.t_end")
    if t_end <= 0.0:
        raise ConfigError("flow.t_end: must be > 0")
    steps = _integer(sec.get("steps", 200), "flow.steps")
    if steps < MIN_STEPS:
        raise ConfigError(f"flow.steps: steps >= {MIN_STEPS} required, got {steps}")
    return FlowConfig(chart=chart, gauge=gauge, t_end=t_end, steps=steps)


def _parse_sweeps(raw) -> SweepConfig:
    sec = _section(raw, "sweeps", {"points", "random"})
    pts = sec.get("points", [[1.0, 1.0]])
    if not isinstance(pts, list):
        raise ConfigError("sweeps.points: expected a list of points")
    points = tuple(_vector(p, f"sweeps.points[{i}]") for i, p in enumerate(pts))
    rnd = sec.get("random") or {}
    if not isinstance(rnd, Mapping):
        raise ConfigError("sweeps.random: expected a mapping")
    unknown = set(rnd) - {"count", "lower", "upper"}
    if unknown:
        raise ConfigError(f"sweeps.random: unknown field(s) {', '.join(sorted(unknown))}")
    count = _integer(rnd.get("count", 0), "sweeps.random.count")
    if count < 0:
        raise ConfigError("sweeps.random.count: must be >= 0")
    lower = upper = ()
    if count:
        lower = _vector(rnd.get("lower"), "sweeps.random.lower")
        upper = _vector(rnd.get("upper"), "sweeps.random.upper", len(lower))
        if any(a >= b for a, b in zip(lower, upper)):
            raise ConfigError("sweeps.random: lower must be below upper in every coordinate")
    if not points and not count:
        raise ConfigError("sweeps: no initial points")
    return SweepConfig(points=points, random_count=count, random_lower=lower, random_upper=upper)


def _parse_curvature(raw) -> CurvatureConfig:
    sec = _section(raw, "curvature", {"metric", "grid", "margin"})
    metric = sec.get("metric", "rn_ruppeiner")
    if metric not in METRICS:
        raise ConfigError(f"curvature.metric: unknown metric {metric!r}; known: {', '.join(sorted(METRICS))}")
    grid = _integer(sec.get("grid", 10), "curvature.grid")
    if grid < 2:
        raise ConfigError("curvature.grid: must be >= 2")
    margin = _number(sec.get("margin", 0.05), "curvature.margin")
    if margin < 0.0:
        raise ConfigError("curvature.margin: must be >= 0")
    return CurvatureConfig(metric=metric, grid=grid, margin=margin)


def _parse_outputs(raw) -> OutputConfig:
    sec = _section(raw, "outputs", {"directory", "formats"})
    directory = sec.get("directory", "out")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("outputs.directory: expected a non-empty string")
    formats = sec.get("formats", ["csv"])
    if isinstance(formats, str):
        formats = [formats]
    if not isinstance(formats, list) or not formats:
        raise ConfigError("outputs.formats: expected a non-empty list")
    for f in formats:
        if f not in FORMATS:
            raise ConfigError(f"outputs.formats: unknown format {f!r}; expected csv or json")
    return OutputConfig(directory=directory, formats=tuple(dict.fromkeys(formats)))


def _parse_tolerances(raw) -> dict[str, float]:
    sec = raw.get("tolerances") or {}
    if not isinstance(sec, Mapping):
        raise ConfigError("tolerances: expected a mapping")
    out = {}
    for name, value in sec.items():
        if name not in TOLERANCES:
            raise ConfigError(f"tolerances.{name}: unknown tolerance; known: {', '.join(sorted(TOLERANCES))}")
        value = _number(value, f"tolerances.{name}")
        if value < 0.0:
            raise ConfigError(f"tolerances.{name}: must be >= 0")
        out[name] = value
    return out


def parse_config(raw: Mapping | None) -> ExperimentConfig:
    """Validate a parsed YAML tree; missing sections take their defaults."""
    raw = raw or {}
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a mapping")
    unknown = set(raw) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown top-level field(s) {', '.join(sorted(map(str, unknown)))}")
    seed = _integer(raw.get("seed", DEFAULT_SEED), "seed")
    if seed < 0:
        raise ConfigError("seed: must be >= 0")
    return ExperimentConfig(
        model=_parse_model(raw),
        flow=_parse_flow(raw),
        sweeps=_parse_sweeps(raw),
        curvature=_parse_curvature(raw),
        outputs=_parse_outputs(raw),
        tolerances=_parse_tolerances(raw),
        seed=seed,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark is not None else ""
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{path}: {where}{problem}") from exc
    return parse_config(raw)
