"""Tests for the scenario CLI: artifacts, manifests, determinism, exit codes."""

import json
from pathlib import Path

import pytest
import yaml

from tropnet.cli import EXIT_NONCONVERGENCE, EXIT_OK, EXIT_USAGE, main
from tropnet.scenarios import bundled_scenarios, load_scenario, run_scenario
from tropnet.errors import ConfigError

SCENARIOS = bundled_scenarios()


def scenario_path(name: str) -> str:
    return SCENARIOS[name]


class TestListScenarios:
    def test_lists_all_bundled(self, capsys):
        assert main(["list-scenarios", "--quiet"]) == EXIT_OK
        out = capsys.readouterr().out.split()
        assert "line14.yaml" in out
        assert "itinerary35.yaml" in out


class TestRun:
    def test_line14_artifacts_and_manifest(self, tmp_path):
        code = main(["run", scenario_path("line14.yaml"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        csv_path = tmp_path / "line14_phases.csv"
        manifest_path = tmp_path / "line14_phases.manifest.json"
        assert csv_path.exists() and manifest_path.exists()
        header = csv_path.read_text().splitlines()[0]
        assert header == "m,rho,h_s,f_per_h,w_s,g_s,phase"
        manifest = json.loads(manifest_path.read_text())
        assert manifest["kind"] == "metro-phases"
        assert "line14_phases.csv" in manifest["artifacts"]

    def test_line14_contains_capacity_row(self, tmp_path):
        main(["run", scenario_path("line14.yaml"), "--out", str(tmp_path), "--quiet"])
        rows = (tmp_path / "line14_phases.csv").read_text().splitlines()
        target = [r for r in rows if r.startswith("21,")]
        assert target and ",72.0," in target[0]

    def test_example32_rate_latency_table(self, tmp_path):
        code = main(["run", scenario_path("example32.yaml"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        text = (tmp_path / "example32_bounds.csv").read_text().splitlines()
        by_pair = {line.split(",")[0]: line.split(",") for line in text[1:]}
        assert by_pair["1-1"][1] == "10.0" and by_pair["1-1"][3] == "0.5"
        assert by_pair["2-1"][1] == "20.0"

    def test_determinism_byte_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["run", scenario_path("junction.yaml"), "--out", str(out),
                         "--seed", "7", "--quiet"]) == EXIT_OK
        f1 = (out1 / "junction_surface.csv").read_bytes()
        f2 = (out2 / "junction_surface.csv").read_bytes()
        assert f1 == f2

    def test_missing_file_usage_error(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.yaml"), "--quiet"]) == EXIT_USAGE

    def test_malformed_scenario_exit2_no_artifacts(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("kind: not-a-kind\noutput: x.csv\n")
        out = tmp_path / "out"
        assert main(["run", str(bad), "--out", str(out), "--quiet"]) == EXIT_USAGE
        assert not out.exists() or not list(out.iterdir())

    def test_schema_violation_exit2(self, tmp_path):
        bad = tmp_path / "bad2.yaml"
        bad.write_text("kind: metro-phases\noutput: x.csv\nline: {}\n")
        assert main(["run", str(bad), "--quiet", "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_nonconvergence_exit3(self, tmp_path):
        # one step of simulation cannot converge: spread stays above tol
        data = yaml.safe_load(Path(scenario_path("demand_dp_surface.yaml")).read_text())
        data["demand"]["m_values"] = [21]
        data["demand"]["lam_levels"] = [20.0]
        data["demand"]["k_steps"] = 4
        short = tmp_path / "short.yaml"
        short.write_text(yaml.safe_dump(data))
        code = main(["run", str(short), "--out", str(tmp_path / "o3"), "--quiet"])
        assert code == EXIT_NONCONVERGENCE
        # artifacts still written, flagged not converged
        text = (tmp_path / "o3" / "demand_dp_surface.csv").read_text()
        assert "False" in text


class TestScenarioSchemas:
    def test_all_bundled_parse(self):
        for name, path in SCENARIOS.items():
            data = load_scenario(path)
            assert data["kind"]

    def test_validate_kind_quick(self):
        data = load_scenario(scenario_path("validate.yaml"))
        data["quick"] = True
        artifacts, warnings = run_scenario(data, {})
        assert not warnings
        (name, header, rows), = artifacts
        assert header == ["family", "cases", "failures", "status"]
        assert all(r[3] == "pass" for r in rows)

    def test_unknown_kind_rejected(self, tmp_path):
        p = tmp_path / "x.yaml"
        p.write_text("kind: bogus\noutput: o.csv\n")
        with pytest.raises(ConfigError):
            load_scenario(p)


class TestItineraryScenario:
    def test_published_bound_via_cli(self, tmp_path):
        code = main(["run", scenario_path("itinerary35.yaml"), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        lines = (tmp_path / "itinerary_delay.csv").read_text().splitlines()
        d1_row = [l for l in lines if l.startswith("d_1")][0]
        assert d1_row.split(",")[-1] == "241.0"


class TestCarfollowBenchScenario:
    def test_variance_trend_nonincreasing(self, tmp_path):
        assert main(["run", scenario_path("carfollow_bench.yaml"),
                     "--out", str(tmp_path), "--quiet"]) == EXIT_OK
        rows = (tmp_path / "carfollow_metrics.csv").read_text().splitlines()[1:]
        variances = [float(r.split(",")[2]) for r in rows]
        for a, b in zip(variances, variances[1:]):
            assert b <= a * 1.05
