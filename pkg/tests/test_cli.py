import json
import os
import subprocess
import sys

import numpy as np
import pytest

from psqoct import cli
from psqoct.io import read_interferogram

SMALL = {
    "source": {"grid_points": 1025},
    "sample": {
        "interfaces": [{"r": [0.0, 0.0]}, {"r": [1.0, 0.0]}],
        "layers": [{"d_um": 120.0, "alpha_deg": 25.0, "material": "quartz", "frozen_retardance": True}],
    },
    "grid": {"start_um": 150.0, "stop_um": 220.0, "points": 141},
    "null": {"ctau_um": 185.0604, "coarse_step_deg": 2.0},
}


def write(path, data):
    path.write_text(json.dumps(data))
    return path


def run(*args):
    return subprocess.run([sys.executable, "-m", "psqoct", *map(str, args)], capture_output=True, text=True, env=os.environ | {"QOCT_THREADS": "2"})


@pytest.fixture
def small(tmp_path):
    return write(tmp_path / "run.json", SMALL)


class TestParser:
    def test_help_lists_flags(self):
        out = run("simulate", "--help").stdout
        for flag in ("--preset", "--config", "--sample", "--bs-reflectance", "--output", "--start-um", "--stop-um", "--points"):
            assert flag in out
        out = run("null", "--help").stdout
        for flag in ("--ctau-um", "--delta-deg", "--coarse-step-deg"):
            assert flag in out
        out = run("extract", "--help").stdout
        for flag in ("--sidecar", "--prominence", "--max-winding"):
            assert flag in out

    def test_unknown_flag(self):
        res = run("simulate", "--preset", "fig4", "--bogus")
        assert res.returncode == 2 and "unrecognized" in res.stderr

    def test_missing_command_and_input(self):
        assert run().returncode == 2
        assert run("simulate").returncode == 2
        assert run("simulate", "--preset", "fig6").returncode == 2

    def test_presets_listing(self, capsys):
        assert cli.main(["presets"]) == 0
        out = capsys.readouterr().out
        assert "fig4" in out and "fig5" in out
        assert cli.main(["presets", "fig5"]) == 0
        assert json.loads(capsys.readouterr().out)["sample"]["layers"][0]["d_um"] == 145.0


class TestSimulate:
    def test_outputs(self, tmp_path, small):
        assert cli.main(["simulate", "--config", str(small), "-o", str(tmp_path / "ig")]) == 0
        ig, meta = read_interferogram(tmp_path / "ig.csv")
        assert ig.positions.size == 141
        assert meta["diagnostics"]["expected_interfaces_um"][1] == pytest.approx(185.0604, abs=1e-3)
        assert meta["config"]["grid"]["points"] == 141
        assert np.min(ig.R_T) < 0.01

    def test_overrides(self, tmp_path, small):
        prefix = tmp_path / "ig"
        args = ["simulate", "--config", str(small), "-o", str(prefix), "--points", "11", "--bs-reflectance", "0.9"]
        assert cli.main(args) == 0
        ig, meta = read_interferogram(tmp_path / "ig.csv")
        assert ig.positions.size == 11
        assert meta["beam_splitter_reflectance"] == 0.9
        assert ig.visibility == pytest.approx(0.21951219512195122)

    def test_empty_sample(self, tmp_path, small):
        empty = write(tmp_path / "empty.json", {"interfaces": [], "layers": []})
        assert cli.main(["simulate", "--config", str(small), "--sample", str(empty), "-o", str(tmp_path / "ig")]) == 0
        ig, _ = read_interferogram(tmp_path / "ig.csv")
        assert not np.any(ig.R_T)

    def test_deterministic_across_threads(self, tmp_path, small):
        outputs = []
        for threads in ("1", "4", "4"):
            prefix = tmp_path / f"ig{len(outputs)}"
            env = os.environ | {"QOCT_THREADS": threads}
            res = subprocess.run(
                [sys.executable, "-m", "psqoct", "simulate", "--config", str(small), "-o", str(prefix)],
                capture_output=True, env=env,
            )
            assert res.returncode == 0
            outputs.append((prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes()))
        assert outputs[0] == outputs[1] == outputs[2]

    def test_config_errors(self, tmp_path, small, capsys):
        assert cli.main(["simulate", "--config", str(tmp_path / "missing.json")]) == 2
        bad = write(tmp_path / "bad.json", {**SMALL, "grid": {"start_um": 1, "stop_um": 0, "points": 5}})
        assert cli.main(["simulate", "--config", str(bad)]) == 2
        assert "stop_um" in capsys.readouterr().err
        assert cli.main(["simulate", "--config", str(small), "--bs-reflectance", "1.2"]) == 2

    @pytest.mark.parametrize("source", [{"span_rad_per_s": 1e12}, {"pump_wavelength_nm": 5000}])
    def test_physics_errors(self, tmp_path, source, capsys):
        cfg = write(tmp_path / "p.json", {**SMALL, "source": source})
        assert cli.main(["simulate", "--config", str(cfg), "-o", str(tmp_path / "ig")]) == 3
        assert "physics error" in capsys.readouterr().err


class TestExtract:
    def test_fig4(self, tmp_path):
        assert cli.main(["simulate", "--preset", "fig4", "-o", str(tmp_path / "f4")]) == 0
        assert cli.main(["extract", str(tmp_path / "f4.csv"), "-o", str(tmp_path / "r.json")]) == 0
        rep = json.loads((tmp_path / "r.json").read_text())
        assert rep["preset"] == "fig4"
        assert len(rep["interface_positions_um"]) == 1
        forward = 8.369202829163209
        assert min(abs(b - forward) for b in rep["delta_branches"]) < 1e-4
        assert rep["lambda_v"] / rep["lambda_h"] == pytest.approx(3.118951478022586, rel=1e-3)

    def test_fig5(self, tmp_path):
        assert cli.main(["simulate", "--preset", "fig5", "-o", str(tmp_path / "f5")]) == 0
        assert cli.main(["extract", str(tmp_path / "f5.csv"), "-o", str(tmp_path / "r.json")]) == 0
        rep = json.loads((tmp_path / "r.json").read_text())
        assert rep["separations_um"][0] == pytest.approx(224.0, abs=0.5)
        assert rep["reflectance_ratio"] == pytest.approx(1.0, rel=1e-3)
        assert len(rep["midpoints"]) == 1

    def test_truncated_csv(self, tmp_path, small):
        cli.main(["simulate", "--config", str(small), "-o", str(tmp_path / "ig")])
        path = tmp_path / "ig.csv"
        path.write_text("\n".join(path.read_text().splitlines()[:50]) + "\n")
        assert run("extract", path, "-o", tmp_path / "r.json").returncode == 2

    def test_degenerate(self, tmp_path, small, capsys):
        empty = write(tmp_path / "empty.json", {"interfaces": [], "layers": []})
        cli.main(["simulate", "--config", str(small), "--sample", str(empty), "-o", str(tmp_path / "ig")])
        assert cli.main(["extract", str(tmp_path / "ig.csv"), "-o", str(tmp_path / "r.json")]) == 4
        assert "DegenerateInputError" in capsys.readouterr().err


class TestNull:
    def test_known_delta_round_trip(self, tmp_path, small):
        delta_deg = float(np.rad2deg(-8.369202829163209))
        out = tmp_path / "n.json"
        assert cli.main(["null", "--config", str(small), "--delta-deg", str(delta_deg), "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["alpha_est_deg"] == pytest.approx(25.0, abs=np.rad2deg(1e-3))
        assert np.hypot(*rep["residuals"]) < 1e-6

    def test_fig4_preset(self, tmp_path):
        out = tmp_path / "n.json"
        assert cli.main(["null", "--preset", "fig4", "-o", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert min(rep["alpha_est_deg"], 180 - rep["alpha_est_deg"]) < np.rad2deg(1e-3)
        assert np.hypot(*rep["residuals"]) < 1e-6

    def test_quarter_wave_is_degenerate(self, tmp_path, small, capsys):
        # 20 um with a 0.01 birefringence is a quarter wave at 800 nm
        sample = {
            "interfaces": [{"r": 0}, {"r": 1}],
            "layers": [{"d_um": 20.0, "alpha_deg": 30, "n_o": 1.55, "n_e": 1.54, "frozen_retardance": True}],
        }
        path = write(tmp_path / "qw.json", sample)
        code = cli.main(["null", "--config", str(small), "--sample", str(path), "--ctau-um", "30.9", "-o", str(tmp_path / "n.json")])
        assert code == 4
        assert "IndeterminateAlphaError" in capsys.readouterr().err

    def test_dark_sample_is_degenerate(self, tmp_path, small):
        path = write(tmp_path / "dark.json", {"interfaces": [{"r": 0}, {"r": 0}], "layers": [{"d_um": 20.0, "material": "quartz"}]})
        assert cli.main(["null", "--config", str(small), "--sample", str(path), "-o", str(tmp_path / "n.json")]) == 4

    def test_needs_ctau(self, tmp_path):
        cfg = write(tmp_path / "c.json", {k: v for k, v in SMALL.items() if k != "null"})
        assert cli.main(["null", "--config", str(cfg)]) == 2
        assert cli.main(["null", "--config", str(cfg), "--ctau-um", "185", "--coarse-step-deg", "0"]) == 2
