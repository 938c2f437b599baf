"""Tests of the command-line front end: parsing, emission, exit codes."""

import json
import subprocess
import sys

import pytest

import sbelab.cli as cli
from sbelab.experiments import ExperimentResult, ScalarResult, Table
from sbelab.simulate import SimConfig


class TestParseConfigFile:
    def test_reads_flat_pairs_with_comments(self, tmp_path):
        path = tmp_path / "lab.cfg"
        path.write_text(
            "# settings\n"
            "seed = 9\n"
            "\n"
            "time_step=2e-4  # inline comment\n"
            "n_samples = 3\n",
            encoding="utf-8",
        )
        assert cli.parse_config_file(path) == {
            "seed": "9",
            "time_step": "2e-4",
            "n_samples": "3",
        }

    def test_rejects_lines_without_equals(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("seed 9\n", encoding="utf-8")
        with pytest.raises(ValueError, match="expected key = value"):
            cli.parse_config_file(path)


class TestBuildSpec:
    def _args(self, **kw):
        base = {
            "experiment": "qv-drift",
            "config": None,
            "set": [],
            "out": ".",
            "seed": None,
        }
        base.update(kw)
        import argparse

        return argparse.Namespace(**base)

    def test_set_beats_config_file(self, tmp_path):
        path = tmp_path / "lab.cfg"
        path.write_text("seed = 1\ntime_step = 1e-4\n", encoding="utf-8")
        spec = cli.build_spec(self._args(config=str(path), set=["seed=2"]))
        assert spec.overrides["seed"] == 2
        assert spec.overrides["time_step"] == 1e-4

    def test_seed_flag_beats_everything(self, tmp_path):
        path = tmp_path / "lab.cfg"
        path.write_text("seed = 1\n", encoding="utf-8")
        spec = cli.build_spec(self._args(config=str(path), set=["seed=2"], seed=3))
        assert spec.overrides["seed"] == 3

    def test_n_samples_routed_to_spec_field(self):
        spec = cli.build_spec(self._args(set=["n_samples=5"]))
        assert spec.n_samples == 5
        assert "n_samples" not in spec.overrides

    def test_malformed_set_item(self):
        with pytest.raises(ValueError, match="--set expects"):
            cli.build_spec(self._args(set=["seed:2"]))


class TestDescribe:
    def test_lists_every_experiment_with_defaults(self, capsys):
        assert cli.main(["describe"]) == 0
        out = capsys.readouterr().out
        for name in (
            "k-constant",
            "stationarity",
            "cole-hopf-drift",
            "nonlinearity-rate",
            "holder",
            "r-decay",
            "qv-drift",
            "chaos-identities",
        ):
            assert f"[{name}]" in out
        assert "n_samples = " in out
        assert "time_step = " in out

    def test_installed_entry_point_describes(self):
        proc = subprocess.run(
            ["sbelab", "describe"], capture_output=True, text=True, timeout=120
        )
        assert proc.returncode == 0
        assert "[k-constant]" in proc.stdout


class TestRunCommand:
    def test_unknown_experiment_exits_2(self, capsys):
        code = cli.main(["run", "--experiment", "warp-drive", "--out", "."])
        assert code == 2
        assert "unknown experiment" in capsys.readouterr().err

    def test_bad_setting_exits_2(self, tmp_path, capsys):
        code = cli.main(
            [
                "run",
                "--experiment",
                "k-constant",
                "--set",
                "time_step=fast",
                "--out",
                str(tmp_path),
            ]
        )
        assert code == 2

    def test_k_constant_run_emits_all_files(self, tmp_path, capsys):
        code = cli.main(
            ["run", "--experiment", "k-constant", "--out", str(tmp_path), "--seed", "5"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "result: PASS" in out
        summary = tmp_path / "k-constant-5.json"
        table = tmp_path / "k-constant-5.constants.csv"
        figure = tmp_path / "k-constant-5.png"
        assert summary.exists() and table.exists() and figure.exists()
        doc = json.loads(summary.read_text(encoding="utf-8"))
        assert doc["experiment"] == "k-constant"
        assert doc["config"]["seed"] == 5
        assert doc["passed"] is True
        assert doc["tables"] == {"constants": "k-constant-5.constants.csv"}
        assert figure.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_reemission_is_byte_identical(self, tmp_path):
        argv = ["run", "--experiment", "k-constant", "--out", str(tmp_path)]
        assert cli.main(argv) == 0
        first = {
            p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())
        }
        assert cli.main(argv) == 0
        second = {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())}
        assert first == second
        assert set(first) == {
            "k-constant-0.json",
            "k-constant-0.constants.csv",
            "k-constant-0.png",
        }

    def test_csv_floats_round_trip(self, tmp_path):
        assert (
            cli.main(["run", "--experiment", "k-constant", "--out", str(tmp_path)]) == 0
        )
        lines = (
            (tmp_path / "k-constant-0.constants.csv")
            .read_text(encoding="utf-8")
            .splitlines()
        )
        assert lines[0] == "level,value,error,bound"
        doc = json.loads(
            (tmp_path / "k-constant-0.json").read_text(encoding="utf-8")
        )
        by_name = {s["name"]: s["value"] for s in doc["scalars"]}
        for line in lines[1:]:
            level_s, value_s, _, _ = line.split(",")
            value = float(value_s)  # full precision must survive the text form
            assert value == by_name[f"k-constant-{int(float(level_s))}"]

    def test_quantitative_failure_exits_1(self, tmp_path, monkeypatch, capsys):
        failing = ExperimentResult(
            "k-constant",
            SimConfig(seed=3),
            1,
            (ScalarResult("k-constant-16", 0.2, 1.0 / 12.0, 0.01),),
            (Table("constants", ("level", "value", "error", "bound"), ()),),
        )
        monkeypatch.setattr(cli, "run_experiment", lambda spec: failing)
        code = cli.main(
            ["run", "--experiment", "k-constant", "--out", str(tmp_path)]
        )
        assert code == 1
        out = capsys.readouterr().out
        assert "FAIL" in out

    def test_config_file_drives_the_run(self, tmp_path):
        cfg = tmp_path / "lab.cfg"
        cfg.write_text("seed = 21\n", encoding="utf-8")
        code = cli.main(
            [
                "run",
                "--experiment",
                "k-constant",
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "results"),
            ]
        )
        assert code == 0
        assert (tmp_path / "results" / "k-constant-21.json").exists()


class TestEmit:
    def test_empty_table_payload_writes_header_only(self, tmp_path):
        result = ExperimentResult(
            "k-constant",
            SimConfig(),
            1,
            (ScalarResult("k-constant-16", 1.0 / 12.0, 1.0 / 12.0, 0.01),),
            (Table("constants", ("level", "value"), ()),),
        )
        files = cli.emit(result, tmp_path)
        csv = tmp_path / "k-constant-0.constants.csv"
        assert csv in files
        assert csv.read_text(encoding="utf-8") == "level,value\n"

    def test_summary_records_build_metadata(self, tmp_path):
        result = ExperimentResult(
            "k-constant",
            SimConfig(),
            1,
            (ScalarResult("k-constant-16", 1.0 / 12.0, 1.0 / 12.0, 0.01),),
        )
        cli.emit(result, tmp_path)
        doc = json.loads(
            (tmp_path / "k-constant-0.json").read_text(encoding="utf-8")
        )
        assert set(doc["build"]) == {"python", "numpy", "scipy", "machine"}
        assert doc["build"]["python"] == ".".join(map(str, sys.version_info[:3]))
