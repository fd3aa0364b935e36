"""Command-line front end.

    igflow flow       --config exp.yaml --out out/ [--format csv|json]
    igflow curvature  --config exp.yaml --out out/
    igflow verify     [--config exp.yaml] [--tol fd_order12=1e-12]
    igflow report     --out out/

Exit codes: 0 success, 1 check failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .acceptance import TOLERANCES, resolve_tolerances, run_acceptance
from .config import ExperimentConfig, default_config, load_config
from .errors import ConfigError, DomainError, IGFlowError
from .flows import FlowSpec, conserved_products, integrate
from .models import METRICS, get_gauge, get_metric, get_model
from .tensor import curvature_sweep

__all__ = ["build_parser", "main"]

log = logging.getLogger("igflow")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

FLOW_SUMMARY = "flow_summary"
CURVATURE_REPORT = "curvature"
VERIFY_REPORT = "verify"


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _tol_pair(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got {text!r}")
    if name not in TOLERANCES:
        raise argparse.ArgumentTypeError(f"unknown tolerance {name!r}")
    try:
        return name, float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {name} needs a number, got {value!r}") from None


def _seed(text: str) -> int:
    try:
        seed = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return seed


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML experiment file")
    common.add_argument("--out", type=Path, help="output directory (overrides outputs.directory)")
    common.add_argument("--seed", type=_seed, help="seed for random sweep points (default 42)")
    common.add_argument("--format", choices=("csv", "json"), help="trajectory format (overrides outputs.formats)")
    common.add_argument(
        "--tol", type=_tol_pair, action="append", default=[], metavar="NAME=VALUE",
        help="tolerance override, repeatable",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="igflow", description="Gradient flows and curvature on dually-flat models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("flow", parents=[common], help="integrate flows from each initial point")
    sub.add_parser("curvature", parents=[common], help="Ricci scalar on a grid over a metric's domain")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    sub.add_parser("report", parents=[common], help="summarize the JSON reports in an output directory")
    return parser


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config is not None else default_config()
    tolerances = dict(cfg.tolerances)
    tolerances.update(dict(args.tol))
    outputs = cfg.outputs
    if args.out is not None:
        outputs = replace(outputs, directory=str(args.out))
    if args.format is not None:
        outputs = replace(outputs, formats=(args.format,))
    return replace(
        cfg,
        tolerances=tolerances,
        outputs=outputs,
        seed=cfg.seed if args.seed is None else args.seed,
    )


def _out_dir(cfg: ExperimentConfig) -> Path:
    path = Path(cfg.outputs.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_flow(cfg: ExperimentConfig) -> int:
    m = get_model(cfg.model.name, **cfg.model.params)
    if m.params is None:
        raise ConfigError(f"model {cfg.model.name!r} has no parameter chart for initial points")
    gauge = None if cfg.flow.gauge is None else get_gauge(cfg.flow.gauge, m, cfg.flow.chart)
    spec = FlowSpec(m, cfg.flow.chart, gauge)
    tol = resolve_tolerances(cfg.tolerances)
    out = _out_dir(cfg)
    entries = []
    lines = []
    for k, start in enumerate(cfg.sweeps.initial_points(cfg.seed)):
        entry = {"index": k, "start": start.tolist()}
        try:
            if start.size != m.n:
                raise DomainError(f"expected {m.n} parameters, got {start.size}")
            x0 = m.from_params(start, cfg.flow.chart)
            traj = integrate(spec, x0, cfg.flow.t_end, cfg.flow.steps)
        except IGFlowError as exc:
            log.warning("initial point %d %s rejected: %s", k, start.tolist(), exc)
            entry.update(status="rejected", reason=str(exc))
            entries.append(entry)
            lines.append(f"point {k} {start.tolist()}: rejected: {exc}")
            continue
        files = []
        for fmt in cfg.outputs.formats:
            path = io.write_trajectory(traj, out / f"trajectory_{k:03d}.{fmt}", fmt)
            files.append(path.name)
        drift = None
        if not spec.deformed and traj.products is not None and len(traj.products):
            pd = conserved_products(traj)
            drift = {"max": pd.max_drift, "covered_until": pd.covered_until, "samples": pd.samples}
        linear = float(np.max(traj.linear_residuals))
        status = "complete" if traj.complete else "exited"
        if not traj.complete:
            log.warning("trajectory %d left the domain at step %d", k, traj.exit_step)
        entry.update(
            status=status,
            samples=len(traj),
            t_last=float(traj.params[-1]),
            exit_reason=traj.exit_reason,
            files=files,
            product_drift=drift,
            conservation_tol=tol["conservation"],
            linear_residual=linear,
            constraint_error=float(np.max(np.abs(traj.constraint - 1.0))),
        )
        entries.append(entry)
        drift_text = "n/a (deformed)" if drift is None else f"{drift['max']:.3e} up to t={drift['covered_until']:g}"
        lines.append(
            f"point {k} {start.tolist()}: {status}, {len(traj)} samples, "
            f"K drift {drift_text}, linear residual {linear:.3e}"
        )
    summary = {
        "model": cfg.model.name,
        "chart": cfg.flow.chart,
        "gauge": cfg.flow.gauge,
        "t_end": cfg.flow.t_end,
        "steps": cfg.flow.steps,
        "seed": cfg.seed,
        "trajectories": entries,
    }
    io.write_json(out / f"{FLOW_SUMMARY}.json", summary)
    io.write_text(out / f"{FLOW_SUMMARY}.txt", "\n".join(lines))
    print("\n".join(lines))
    return EXIT_OK


def cmd_curvature(cfg: ExperimentConfig) -> int:
    entry = METRICS[cfg.curvature.metric]
    g = get_metric(cfg.curvature.metric)
    tol = resolve_tolerances(cfg.tolerances)
    sweep = curvature_sweep(g, cfg.curvature.grid, cfg.curvature.margin, tol["flat"])
    if sweep.values.size == 0:
        status, measured, bound = "fail", float("nan"), tol["flat"]
    elif entry.expected_ricci is None:
        measured, bound = sweep.max_abs, tol["flat"]
        status = "pass" if measured <= bound else "fail"
    else:
        measured = float(np.max(np.abs(sweep.values - entry.expected_ricci)))
        bound = tol["gaussian_ricci"]
        status = "curved (expected)" if measured <= bound else "fail"
    report = {
        "metric": g.name,
        "names": list(g.names),
        "grid": cfg.curvature.grid,
        "margin": cfg.curvature.margin,
        "expected_ricci": entry.expected_ricci,
        "status": status,
        "measured": measured,
        "tolerance": bound,
        "max_abs_ricci": sweep.max_abs,
        "skipped": sweep.skipped,
        "signature": list(sweep.signature),
        "signature_violations": sweep.signature_violations,
        "points": [
            {"coords": p.tolist(), "ricci": float(r), "condition": float(c)}
            for p, r, c in zip(sweep.points, sweep.values, sweep.conditions)
        ],
    }
    out = _out_dir(cfg)
    io.write_json(out / f"{CURVATURE_REPORT}.json", report)
    expect = "0" if entry.expected_ricci is None else f"{entry.expected_ricci:g}"
    text = (
        f"{g.name}: {status}; max|R|={sweep.max_abs:.3e}, expected R={expect}, "
        f"deviation {measured:.3e} (tol {bound:g}); {sweep.values.size} points, {sweep.skipped} skipped"
    )
    io.write_text(out / f"{CURVATURE_REPORT}.txt", text)
    print(text)
    return EXIT_OK if status != "fail" else EXIT_FAIL


def cmd_verify(cfg: ExperimentConfig, write: bool) -> int:
    report = run_acceptance(cfg.tolerances, seed=cfg.seed)
    print(report.text())
    if write:
        out = _out_dir(cfg)
        io.write_json(out / f"{VERIFY_REPORT}.json", report.to_dict(timing=False))
        io.write_text(out / f"{VERIFY_REPORT}.txt", report.text(timing=False))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_report(cfg: ExperimentConfig) -> int:
    out = Path(cfg.outputs.directory)
    found = []
    for stem in (FLOW_SUMMARY, CURVATURE_REPORT, VERIFY_REPORT):
        path = out / f"{stem}.json"
        if not path.exists():
            continue
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc.msg}, line {exc.lineno})") from exc
        found.append((stem, data))
    if not found:
        raise ConfigError(f"no reports found in {out}")
    failed = False
    for stem, data in found:
        if stem == FLOW_SUMMARY:
            trajs = data["trajectories"]
            done = sum(t["status"] == "complete" for t in trajs)
            print(f"flow: {data['model']} on {data['chart']}, {done}/{len(trajs)} complete")
        elif stem == CURVATURE_REPORT:
            failed |= data["status"] == "fail"
            print(f"curvature: {data['metric']} {data['status']} (max|R|={data['max_abs_ricci']})")
        else:
            crit = data["criteria"]
            bad = [c["criterion"] for c in crit if c["status"] != "pass"]
            failed |= bool(bad)
            suffix = f", failing: {', '.join(map(str, bad))}" if bad else ""
            print(f"verify: {len(crit) - len(bad)}/{len(crit)} criteria passed{suffix}")
    return EXIT_FAIL if failed else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = _resolve(args)
        try:
            resolve_tolerances(cfg.tolerances)
        except (KeyError, ValueError) as exc:
            raise ConfigError(exc.args[0] if exc.args else str(exc)) from exc
        if args.command == "flow":
            return cmd_flow(cfg)
        if args.command == "curvature":
            return cmd_curvature(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, write=args.out is not None or args.config is not None)
        return cmd_report(cfg)
    except ConfigError as exc:
        print(f"igflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
