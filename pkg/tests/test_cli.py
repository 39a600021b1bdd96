"""CLI dispatch: exit codes, output layout, reproducibility."""

import json

import pytest

from sch_lab.cli import main


def write_config(tmp_path, name="run.json", **overrides):
    cfg = {
        "grid": {"N": 32},
        "drift": {"epsilon": 0.0, "theta": 0.75,
                  "damping": {"name": "constant", "lambda0": 0.0}},
        "noise": {"q_bank": [], "seed": 7},
        "scheme": {"scheme": "EulerMaruyama", "dt": 1e-3, "t0": 0.0, "t_end": 0.05,
                   "record_every": 10},
        "diagnostic_s": 3.0,
        "experiment": {"kind": "simulate"},
        "initial": {"kind": "sine", "amplitude": 0.2},
    }
    for key, val in overrides.items():
        if isinstance(val, dict) and key in cfg:
            cfg[key].update(val)
        else:
            cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestExitCodes:
    def test_simulate_success(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
        assert (out / "trajectory.csv").exists()
        assert (out / "manifest.json").exists()

    def test_invalid_config_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, drift={"theta": 2.0})
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 2
        assert "config error" in capsys.readouterr().err
        assert not out.exists()

    def test_subcommand_mismatch_exits_2(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["ensemble", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 2

    def test_numerical_failure_exits_1(self, tmp_path):
        # dt far above the CFL guard for a steep initial state
        cfg = write_config(tmp_path,
                           scheme={"dt": 0.5, "t_end": 5.0},
                           initial={"kind": "sine", "amplitude": 5.0})
        assert main(["simulate", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 1


class TestReproducibility:
    def test_byte_identical_outputs(self, tmp_path):
        cfg = write_config(tmp_path, diagnostic_s=4.0, noise={
            "q_bank": [{"kind": "B_family", "coefficient": 0.2,
                        "base": "derivative", "order": 1.0}],
            "seed": 11})
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()

    def test_seed_override_changes_path(self, tmp_path):
        cfg = write_config(tmp_path, diagnostic_s=4.0, noise={
            "q_bank": [{"kind": "B_family", "coefficient": 0.2,
                        "base": "derivative", "order": 1.0}],
            "seed": 11})
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg), "--out", str(a)])
        main(["simulate", "--config", str(cfg), "--out", str(b),
              "--seed-override", "99"])
        assert (a / "trajectory.csv").read_bytes() != (b / "trajectory.csv").read_bytes()


class TestManifest:
    def test_contents(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        main(["simulate", "--config", str(cfg), "--out", str(out)])
        manifest = json.loads((out / "manifest.json").read_text())
        assert "config_hash" in manifest
        assert "tool_version" in manifest
        assert "wall_clock_s" in manifest
        assert manifest["steps"] > 0


class TestEstimateConstants:
    def test_writes_constants_json(self, tmp_path):
        cfg = write_config(
            tmp_path,
            experiment={"kind": "estimate-constants", "samples": 20,
                        "resolutions": [32, 64]},
            noise={"q_bank": [{"kind": "A_family", "coefficient": [1.0, 0.3],
                               "base": "derivative", "order": 1.0}],
                   "seed": 5},
            drift={"epsilon": 0.0, "theta": 0.75,
                   "damping": {"name": "constant", "lambda0": 0.0}},
            diagnostic_s=4.0,
        )
        out = tmp_path / "out"
        assert main(["estimate-constants", "--config", str(cfg),
                     "--out", str(out)]) == 0
        result = json.loads((out / "constants.json").read_text())
        assert set(result["Xi"]) == {"32", "64"}
        assert result["orders"][0]["slope"] < 0.25


class TestBlowupScan:
    def test_scan_rows(self, tmp_path):
        cfg = write_config(
            tmp_path,
            experiment={"kind": "blowup-scan", "epsilons": [0.0, 0.5]},
            scheme={"dt": 1e-3, "t_end": 0.05, "record_every": 10},
        )
        out = tmp_path / "out"
        assert main(["blowup-scan", "--config", str(cfg), "--out", str(out)]) == 0
        rows = json.loads((out / "blowup_scan.json").read_text())
        assert [r["epsilon"] for r in rows] == [0.0, 0.5]
