import json
import math

import numpy as np
import pytest

from igflow import io
from igflow.cli import main
from igflow.config import default_config, load_config, parse_config
from igflow.dually_flat import ETA
from igflow.errors import ConfigError
from igflow.flows import FlowSpec, integrate
from igflow.models import gaussian_model

HEADER = ["t", "mu", "sigma", "eta1", "eta2", "theta1", "theta2", "C", "Phi", "K11", "K12", "K21", "K22"]


def write_config(tmp_path, text, name="exp.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestConfig:
    def test_defaults(self):
        cfg = default_config()
        assert cfg.model.name == "gaussian" and cfg.flow.steps == 200 and cfg.seed == 42

    def test_full_tree(self, tmp_path):
        path = write_config(tmp_path, """
model: {name: gaussian}
flow: {chart: eta, gauge: gaussian_inv_sigma, t_end: 1.0, steps: 50}
sweeps:
  points: [[1.0, 1.0]]
  random: {count: 2, lower: [-1.0, 0.5], upper: [1.0, 2.0]}
curvature: {metric: gaussian_fisher, grid: 4}
outputs: {directory: out, formats: [csv, json]}
tolerances: {flat: 1.0e-6}
seed: 7
""")
        cfg = load_config(path)
        assert cfg.flow.gauge == "gaussian_inv_sigma"
        assert cfg.outputs.formats == ("csv", "json")
        assert cfg.tolerances == {"flat": 1e-6}
        pts = cfg.sweeps.initial_points(cfg.seed)
        assert len(pts) == 3
        np.testing.assert_array_equal(pts[1:], cfg.sweeps.initial_points(cfg.seed)[1:])

    def test_zero_gauge_is_none(self):
        assert parse_config({"flow": {"gauge": "zero"}}).flow.gauge is None

    @pytest.mark.parametrize(
        "raw, field",
        [
            ({"flow": {"steps": 5}}, "flow.steps"),
            ({"flow": {"t_end": -1}}, "flow.t_end"),
            ({"flow": {"chart": "xi"}}, "flow.chart"),
            ({"flow": {"gauge": "maxwell"}}, "flow.gauge"),
            ({"model": {"name": "schwarzschild"}}, "model.name"),
            ({"model": {"name": "quadratic", "params": {"dim": 3}}}, "model.params"),
            ({"curvature": {"metric": "bogus"}}, "curvature.metric"),
            ({"outputs": {"formats": ["xml"]}}, "outputs.formats"),
            ({"tolerances": {"nope": 1.0}}, "tolerances.nope"),
            ({"tolerances": {"flat": -1.0}}, "tolerances.flat"),
            ({"sweeps": {"points": [[1.0, "a"]]}}, "sweeps.points[0][1]"),
            ({"sweeps": {"random": {"count": 1, "lower": [0, 0], "upper": [1]}}}, "sweeps.random.upper"),
            ({"seed": -3}, "seed"),
            ({"extra": 1}, "extra"),
        ],
    )
    def test_errors_name_the_field(self, raw, field):
        with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
            parse_config(raw)

    def test_steps_message(self):
        with pytest.raises(ConfigError, match="steps >= 10"):
            parse_config({"flow": {"steps": 5}})

    def test_yaml_syntax_error_has_line(self, tmp_path):
        path = write_config(tmp_path, "flow:\n  steps: [1, 2\n")
        with pytest.raises(ConfigError, match="line"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.yaml")


@pytest.fixture(scope="module")
def traj():
    m = gaussian_model()
    return integrate(FlowSpec(m, ETA), m.from_params([1.0, 1.0], ETA), 1.0, 20)


@pytest.fixture(scope="module")
def verified(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify")
    code = main(["verify", "--out", str(out), "--tol", "fd_order12=1e-30"])
    return code, out


class TestIO:
    def test_columns(self, traj):
        assert io.trajectory_columns(traj) == HEADER

    def test_csv_round_trip(self, traj, tmp_path):
        path = io.write_trajectory(traj, tmp_path / "t.csv")
        header, values = io.read_trajectory_csv(path)
        assert header == HEADER
        np.testing.assert_array_equal(values[:, 0], traj.params)
        np.testing.assert_array_equal(values[:, 3:5], traj.eta)

    def test_json_rows(self, traj, tmp_path):
        rows = json.loads(io.write_trajectory(traj, tmp_path / "t.json", "json").read_text())
        assert len(rows) == len(traj) and list(rows[0]) == HEADER

    def test_unknown_format(self, traj, tmp_path):
        with pytest.raises(ValueError):
            io.write_trajectory(traj, tmp_path / "t.xml", "xml")

    def test_float_format_round_trips(self):
        for v in (math.pi, 1e-300, -2.5e17, 0.1 + 0.2):
            assert float(io.format_float(v)) == v

    def test_json_non_finite_becomes_null(self, tmp_path):
        path = io.write_json(tmp_path / "x.json", {"a": float("nan"), "b": np.float64(1.5), "c": np.arange(2)})
        assert json.loads(path.read_text()) == {"a": None, "b": 1.5, "c": [0, 1]}


class TestFlowCommand:
    def test_default_config(self, tmp_path, capsys):
        assert main(["flow", "--out", str(tmp_path)]) == 0
        header, values = io.read_trajectory_csv(tmp_path / "trajectory_000.csv")
        assert header == HEADER
        assert values[-1, 2] == pytest.approx(math.e, abs=1e-6)
        summary = json.loads((tmp_path / "flow_summary.json").read_text())
        entry = summary["trajectories"][0]
        assert entry["status"] == "complete"
        assert entry["product_drift"]["max"] <= 1e-6
        assert entry["linear_residual"] <= 1e-8
        assert "K drift" in capsys.readouterr().out

    def test_deformed_has_empty_products(self, tmp_path):
        cfg = write_config(tmp_path, "flow: {gauge: gaussian_inv_sigma, t_end: 1.0, steps: 20}\n")
        assert main(["flow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        text = (tmp_path / "o" / "trajectory_000.csv").read_text().splitlines()
        assert text[0].split(",") == HEADER
        assert all(line.endswith(",,,,") for line in text[1:])
        summary = json.loads((tmp_path / "o" / "flow_summary.json").read_text())
        assert summary["trajectories"][0]["product_drift"] is None

    def test_json_format(self, tmp_path):
        assert main(["flow", "--out", str(tmp_path), "--format", "json"]) == 0
        assert (tmp_path / "trajectory_000.json").exists()
        assert not (tmp_path / "trajectory_000.csv").exists()

    def test_domain_exit_warns_and_succeeds(self, tmp_path, caplog):
        cfg = write_config(tmp_path, "flow: {chart: theta, t_end: 2.0, steps: 200}\n")
        assert main(["flow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        summary = json.loads((tmp_path / "o" / "flow_summary.json").read_text())
        assert summary["trajectories"][0]["status"] == "exited"
        assert "left the domain" in caplog.text

    def test_rejected_start_recorded(self, tmp_path):
        cfg = write_config(tmp_path, "sweeps: {points: [[0.0, -1.0], [0.0, 1.0]]}\nflow: {steps: 10, t_end: 0.5}\n")
        assert main(["flow", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        summary = json.loads((tmp_path / "o" / "flow_summary.json").read_text())
        assert [t["status"] for t in summary["trajectories"]] == ["rejected", "complete"]

    def test_steps_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "flow: {steps: 5}\n")
        assert main(["flow", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "steps >= 10" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, "sweeps: {points: [[1.0, 1.0]], random: {count: 2, lower: [-1, 0.5], upper: [1, 2]}}\nflow: {steps: 40}\n")
        for d in ("a", "b"):
            assert main(["flow", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
        for name in ("trajectory_000.csv", "trajectory_002.csv", "flow_summary.json", "flow_summary.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_random_points(self, tmp_path):
        cfg = write_config(tmp_path, "sweeps: {points: [], random: {count: 1, lower: [-1, 0.5], upper: [1, 2]}}\nflow: {steps: 10}\n")
        main(["flow", "--config", str(cfg), "--out", str(tmp_path / "a")])
        main(["flow", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "43"])
        a = json.loads((tmp_path / "a" / "flow_summary.json").read_text())["trajectories"][0]["start"]
        b = json.loads((tmp_path / "b" / "flow_summary.json").read_text())["trajectories"][0]["start"]
        assert a != b


class TestCurvatureCommand:
    def run(self, tmp_path, metric):
        cfg = write_config(tmp_path, f"curvature: {{metric: {metric}}}\n", name=f"{metric}.yaml")
        code = main(["curvature", "--config", str(cfg), "--out", str(tmp_path / metric)])
        return code, json.loads((tmp_path / metric / "curvature.json").read_text())

    def test_rn_ruppeiner_pass(self, tmp_path):
        code, rep = self.run(tmp_path, "rn_ruppeiner")
        assert code == 0 and rep["status"] == "pass"
        assert rep["max_abs_ricci"] <= 1e-5 and len(rep["points"]) == 100

    def test_gaussian_curved_expected(self, tmp_path):
        code, rep = self.run(tmp_path, "gaussian_fisher")
        assert code == 0 and rep["status"] == "curved (expected)"

    def test_kerr_outer_weinhold_measured_curved(self, tmp_path):
        code, rep = self.run(tmp_path, "kerr_outer_weinhold")
        assert code == 1 and rep["status"] == "fail"
        assert rep["signature"] == [1, 1] and rep["skipped"] == 0

    def test_tolerance_override(self, tmp_path):
        cfg = write_config(tmp_path, "curvature: {metric: gaussian_fisher}\n")
        assert main(["curvature", "--config", str(cfg), "--out", str(tmp_path), "--tol", "gaussian_ricci=1e-20"]) == 1


class TestVerifyAndReport:
    def test_forced_failure(self, verified):
        code, out = verified
        assert code == 1
        text = (out / "verify.txt").read_text()
        assert "[FAIL] criterion 11" in text
        assert "budget" not in text

    def test_report_json(self, verified):
        _, out = verified
        data = json.loads((out / "verify.json").read_text())
        assert [c["criterion"] for c in data["criteria"]] == list(range(1, 13))
        assert data["tolerances"]["fd_order12"] == 1e-30

    def test_report_summary(self, verified, capsys):
        _, out = verified
        capsys.readouterr()
        assert main(["report", "--out", str(out)]) == 1
        assert "criteria passed" in capsys.readouterr().out

    def test_report_without_files(self, tmp_path):
        assert main(["report", "--out", str(tmp_path)]) == 2


class TestUsageErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["verify", "--tol", "fd_order12"],
            ["verify", "--tol", "bogus=1"],
            ["verify", "--tol", "flat=abc"],
            ["flow", "--seed", "-1"],
            ["flow", "--format", "xml"],
            ["fly"],
            [],
        ],
    )
    def test_exit_two(self, argv):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2

    def test_unknown_model(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "model: {name: schwarzschild}\n")
        assert main(["verify", "--config", str(cfg)]) == 2
        assert "unknown model" in capsys.readouterr().err
