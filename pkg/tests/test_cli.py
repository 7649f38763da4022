"""Command-line interface: exit codes, outputs, determinism."""

import csv
import io
import json

import pytest

from fareopt.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestValidate:
    def test_case_study_valid(self, capsys, casestudy_path):
        code, out, _ = run(capsys, "validate", str(casestudy_path))
        assert code == 0
        doc = json.loads(out)
        assert doc["demand"] == 3000.0
        assert len(doc["roads"]) == 2

    def test_invalid_config_lists_every_problem(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"roads": [{"free_flow_latency": 30, "capacity": -1,'
                        ' "car_cost": 15, "min_taxi_fare": 9}], "demand": 0}')
        code, _, err = run(capsys, "validate", str(path))
        assert code == 1
        assert "capacity" in err
        assert "taxi_risk_rate" in err
        assert "demand" in err

    def test_missing_rail_valid(self, capsys, tmp_path):
        path = tmp_path / "no_rail.json"
        path.write_text('{"roads": [{"free_flow_latency": 30, "capacity": 900,'
                        ' "car_cost": 15, "min_taxi_fare": 9}],'
                        ' "taxi_risk_rate": 1, "demand": 100}')
        code, out, _ = run(capsys, "validate", str(path))
        assert code == 0
        assert "rail" not in json.loads(out)

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "validate", "/nonexistent/net.json")
        assert code == 1


class TestOptimize:
    def optimize(self, capsys, tmp_path, casestudy_path, population_pre_path, out_name,
                 *extra):
        out = tmp_path / out_name
        code, stdout, stderr = run(
            capsys, "optimize",
            "--config", str(casestudy_path),
            "--population", str(population_pre_path),
            "--gamma", "0.5", "--starts", "2", "--seed", "7", "--threads", "1",
            "--out", str(out), *extra,
        )
        return code, out

    def test_report_contents(self, capsys, tmp_path, casestudy_path, population_pre_path):
        code, out = self.optimize(
            capsys, tmp_path, casestudy_path, population_pre_path, "report.json"
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["v"] == 1
        assert doc["seed"] == 7
        assert doc["tool_version"]
        assert len(doc["config_sha256"]) == 64
        assert len(doc["fares"]) == 2
        assert abs(doc["flows"]["total"] - 3000.0) <= 3e-3
        recomputed = 0.5 * doc["risk_total"] + 0.5 * doc["latency_total"] + doc["rail_penalty"]
        assert abs(doc["objective"] - recomputed) <= 1e-9 * doc["objective"]
        assert len(doc["starts"]) == 2

    def test_byte_identical_across_runs(self, capsys, tmp_path, casestudy_path,
                                        population_pre_path):
        _, first = self.optimize(
            capsys, tmp_path, casestudy_path, population_pre_path, "a.json"
        )
        _, second = self.optimize(
            capsys, tmp_path, casestudy_path, population_pre_path, "b.json"
        )
        assert first.read_bytes() == second.read_bytes()

    def test_zero_starts_is_usage_error(self, capsys, casestudy_path, population_pre_path):
        code, _, err = run(
            capsys, "optimize", "--config", str(casestudy_path),
            "--population", str(population_pre_path),
            "--gamma", "0.5", "--starts", "0",
        )
        assert code == 1

    def test_bad_gamma_is_usage_error(self, capsys, casestudy_path, population_pre_path):
        code, _, _ = run(
            capsys, "optimize", "--config", str(casestudy_path),
            "--population", str(population_pre_path), "--gamma", "1.5",
        )
        assert code == 1


class TestSweep:
    def test_csv_shape_and_metadata(self, capsys, tmp_path, casestudy_path,
                                    population_pre_path):
        out = tmp_path / "sweep.csv"
        code, _, _ = run(
            capsys, "sweep",
            "--config", str(casestudy_path), "--population", str(population_pre_path),
            "--gamma-grid", "0,0.5,1", "--starts", "2", "--seed", "3",
            "--threads", "1", "--out", str(out),
        )
        assert code == 0
        text = out.read_text()
        comments = [line for line in text.splitlines() if line.startswith("#")]
        assert any("seed=3" in c for c in comments)
        assert any("config_sha256=" in c for c in comments)
        rows = list(csv.reader(io.StringIO(
            "\n".join(l for l in text.splitlines() if not l.startswith("#"))
        )))
        header, data = rows[0], rows[1:]
        assert header == ["gamma", "L", "R", "fare_1", "fare_2",
                          "flow_car_1", "flow_car_2", "flow_taxi_1", "flow_taxi_2",
                          "flow_rail", "flow_walk", "status"]
        assert [r[0] for r in data] == ["0.0", "0.5", "1.0"]
        assert all(r[-1] == "ok" for r in data)

    def test_empty_grid_is_usage_error(self, capsys, casestudy_path, population_pre_path):
        code, _, _ = run(
            capsys, "sweep", "--config", str(casestudy_path),
            "--population", str(population_pre_path), "--gamma-grid", "",
        )
        assert code == 1


class TestBenchLearning:
    def test_csv_output_and_determinism(self, capsys, tmp_path):
        args = ("bench-learning", "--users", "3", "--active", "2", "--holdout", "2",
                "--seed", "5", "--pool-size", "60")
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        code, _, err = run(capsys, *args, "--out", str(out_a))
        assert code == 0
        assert "active" in err  # summary line on stderr
        code, _, _ = run(capsys, *args, "--out", str(out_b))
        assert out_a.read_bytes() == out_b.read_bytes()
        rows = [line for line in out_a.read_text().splitlines()
                if line and not line.startswith("#")]
        assert rows[0] == "user,accuracy_active,accuracy_random"
        assert len(rows) >= 5  # 3 users + mean + p-value + chance

    def test_json_format(self, capsys, tmp_path):
        out = tmp_path / "bench.json"
        code, _, _ = run(
            capsys, "bench-learning", "--users", "2", "--active", "1",
            "--holdout", "1", "--seed", "5", "--pool-size", "40",
            "--format", "json", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["rows"]) == 2
        assert doc["chance_level"] == pytest.approx(1 / 6)

    def test_negative_active_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "bench-learning", "--users", "2", "--active", "-1")
        assert code == 1


class TestServeConfig:
    def test_bad_config_path_exits_one(self, capsys):
        code, _, err = run(capsys, "serve", "--config", "/nonexistent/conf.json")
        assert code == 1


class TestNumericalFailureExitCode:
    def test_optimizer_failure_exits_two(self, capsys, monkeypatch, casestudy_path,
                                         population_pre_path):
        from fareopt import cli
        from fareopt.equilibrium import OptimizationError

        def explode(*args, **kwargs):
            raise OptimizationError("all starts failed")

        monkeypatch.setattr(cli, "optimize_fares", explode)
        code, _, err = run(
            capsys, "optimize", "--config", str(casestudy_path),
            "--population", str(population_pre_path), "--gamma", "0.5",
            "--starts", "1",
        )
        assert code == 2
        assert "numerical failure" in err
