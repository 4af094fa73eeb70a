"""
Tests for the command-line interface and its exit codes.
"""

import json

import pytest

from omtherm import cli
from omtherm.visualization import plots


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(
        json.dumps(
            {
                "temperatures": [0.02, 1.5, 3.0, 4.5, 6.5],
                "pulse": {"n_reps": 100},
                "offresonance": False,
                "seed": 4,
            }
        )
    )
    return path


class TestParser:
    """Tests for argument parsing."""

    def test_subcommands(self):
        """Every stage is a subcommand sharing the common options."""
        parser = cli.build_parser()
        args = parser.parse_args(["analyze", "a.omtrace", "--seed", "3", "--threads", "2"])
        assert args.command == "analyze"
        assert args.seed == 3
        assert args.threads == 2
        assert [str(p) for p in args.traces] == ["a.omtrace"]

    def test_usage_errors(self):
        """Unknown or missing subcommands exit with 2."""
        assert cli.main([]) == 2
        assert cli.main(["calibrate-all"]) == 2
        assert cli.main(["simulate", "--seed", "x"]) == 2

    def test_version(self, capsys):
        """--version exits cleanly."""
        assert cli.main(["--version"]) == 0
        assert "omtherm" in capsys.readouterr().out


class TestExitCodes:
    """Tests for the mapping of failures to exit status."""

    def test_simulate(self, config_file, tmp_path):
        """A valid run exits with 0 and writes its traces."""
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(config_file), "--out", str(out)]) == 0
        assert len(list((out / "traces").glob("*.omtrace"))) == 5

    def test_invalid_config(self, tmp_path):
        """An unknown configuration key exits with 3."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"pulse": {"reps": 10}}))
        assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 3

    def test_missing_config_file(self, tmp_path):
        """An unreadable configuration exits with 5."""
        assert cli.main(["simulate", "--config", str(tmp_path / "none.json")]) == 5

    def test_analyze_without_traces(self, tmp_path):
        """Nothing to analyze exits with 2."""
        assert cli.main(["analyze", "--out", str(tmp_path)]) == 2

    def test_corrupted_trace(self, config_file, tmp_path):
        """A damaged container exits with 5."""
        out = tmp_path / "out"
        cli.main(["simulate", "--config", str(config_file), "--out", str(out)])
        path = sorted((out / "traces").glob("*.omtrace"))[0]
        path.write_bytes(b"XXXXXXXX" + path.read_bytes()[8:])
        argv = ["analyze", str(path), "--config", str(config_file), "--out", str(out)]
        assert cli.main(argv) == 5

    def test_missing_stage_output(self, tmp_path):
        """Metrics before calibration exits with 7."""
        assert cli.main(["metrics", "--out", str(tmp_path)]) == 7

    def test_resource_limit(self, tmp_path):
        """Exceeding the memory budget exits with 6."""
        path = tmp_path / "big.json"
        path.write_text(json.dumps({"output": {"max_bytes": 1000}}))
        assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 6

    def test_metrics_prints_json(self, tmp_path, capsys):
        """The metrics command prints the figures of merit."""
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"metrics": {"n_th": 0.7, "gamma_total": 1.05e6, "n_eq": 95}}))
        assert cli.main(["metrics", "--config", str(path), "--out", str(tmp_path)]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["coop"]["value"] == pytest.approx(3.775, rel=1e-3)

    def test_scan_fit_missing_file(self, tmp_path):
        """A missing scan exits with 2."""
        assert cli.main(["scan-fit", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 2

    def test_plots_without_matplotlib(self, config_file, tmp_path, monkeypatch):
        """--plots without matplotlib exits with 7."""
        monkeypatch.setattr(plots, "HAS_MATPLOTLIB", False)
        out = tmp_path / "out"
        argv = ["pipeline", "--plots", "--config", str(config_file), "--out", str(out)]
        assert cli.main(argv) == 7


class TestStages:
    """Running the stages one after another from the command line."""

    def test_stage_by_stage(self, config_file, tmp_path):
        """simulate, analyze, calibrate and metrics chain through files."""
        common = ["--config", str(config_file), "--out", str(tmp_path / "out")]
        for stage in ("simulate", "analyze", "calibrate", "metrics"):
            assert cli.main([stage, *common]) == 0
        assert (tmp_path / "out" / "metrics" / "figures_of_merit.json").exists()

    def test_seed_override(self, config_file, tmp_path):
        """--seed reaches the written provenance."""
        out = tmp_path / "out"
        cli.main(["simulate", "--config", str(config_file), "--out", str(out), "--seed", "21"])
        sidecar = sorted((out / "traces").glob("*.json"))[0]
        assert json.loads(sidecar.read_text())["seed"] == 21


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
