import json
import subprocess
import sys

import numpy as np
import pytest

from fecim.cli import main
from fecim.configio import UsageError, load_config


def run_cli(args):
    return subprocess.run([sys.executable, "-m", "fecim.cli", *args],
                          capture_output=True, text=True)


class TestConfig:
    def test_defaults_load(self):
        cfg = load_config()
        assert cfg.array().rows == 8
        assert cfg.bias().v_read == 0.35

    def test_override(self):
        cfg = load_config(overrides=[("array.rows", "128")])
        assert cfg.array().rows == 128

    def test_missing_file(self):
        with pytest.raises(UsageError):
            load_config("does-not-exist.ini")

    def test_file_plus_override(self, tmp_path):
        p = tmp_path / "exp.ini"
        p.write_text("[array]\nrows = 16\n")
        cfg = load_config(str(p), overrides=[("array.rows", "32")])
        assert cfg.array().rows == 32

    def test_config_dir_env(self, tmp_path, monkeypatch):
        p = tmp_path / "exp.ini"
        p.write_text("[array]\nrows = 16\n")
        monkeypatch.setenv("FECIM_CONFIG_DIR", str(tmp_path))
        cfg = load_config("exp.ini")
        assert cfg.array().rows == 16

    def test_hash_stable(self):
        assert load_config().config_hash() == load_config().config_hash()

    def test_design_round_trip_through_dump(self, tmp_path):
        from fecim.configio import dump_design
        from fecim import shipped

        text = dump_design(shipped.DESIGN, shipped.ERASED_TEMP_COEFF,
                           shipped.MLC_SPAN)
        p = tmp_path / "cal.ini"
        p.write_text(text)
        cfg = load_config(str(p))
        d = cfg.design()
        assert d.fefet.i_s == pytest.approx(shipped.FITTED_I_S)
        assert d.vth_table.levels == shipped.DESIGN.vth_table.levels


class TestCommands:
    def test_print_config(self, capsys):
        rc = main(["nmr", "--print-config"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[array]" in out and "rows" in out

    def test_nmr_outputs(self, tmp_path):
        rc = main(["nmr", "--out", str(tmp_path), "--set",
                   "temperature.points", "6"])
        assert rc == 0
        rep = json.loads((tmp_path / "nmr_report.json").read_text())
        assert rep["binary_nmr_min"] > 0
        assert rep["nmr_min"] < 0
        assert "config_hash" in rep and "seed" in rep

    def test_deterministic_outputs(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        for d in (a_dir, b_dir):
            rc = main(["cell-sweep", "--out", str(d), "--seed", "7",
                       "--set", "temperature.points", "4"])
            assert rc == 0
        a = (a_dir / "cell_iv.csv").read_bytes()
        b = (b_dir / "cell_iv.csv").read_bytes()
        assert a == b

    def test_empty_temperature_grid_is_usage_error(self, tmp_path):
        r = run_cli(["device-sweep", "--out", str(tmp_path),
                     "--set", "temperature.points", "0"])
        assert r.returncode == 2
        # the error document is the last stderr line (warnings may precede)
        err = json.loads(r.stderr.strip().splitlines()[-1])
        assert err["error"] == "usage"
        assert "temperature" in err["field"]

    def test_monte_carlo_report(self, tmp_path):
        rc = main(["monte-carlo", "--out", str(tmp_path),
                   "--set", "variation.runs", "40"])
        assert rc == 0
        rep = json.loads((tmp_path / "monte_carlo_report.json").read_text())
        assert set(rep["per_digit"]) == {"1", "2", "3"}

    def test_monte_carlo_zero_sigma(self, tmp_path):
        rc = main(["monte-carlo", "--out", str(tmp_path),
                   "--set", "variation.runs", "16",
                   "--set", "variation.sigma_vt", "0.0"])
        assert rc == 0
        rep = json.loads((tmp_path / "monte_carlo_report.json").read_text())
        for d in ("1", "2", "3"):
            assert rep["per_digit"][d]["decision_accuracy"] == 1.0
            assert rep["per_digit"][d]["column_rel_sigma"] == 0.0

    def test_energy_report(self, tmp_path):
        rc = main(["energy", "--out", str(tmp_path)])
        assert rc == 0
        rep = json.loads((tmp_path / "energy_report.json").read_text())
        assert rep["tops_per_watt"] == pytest.approx(48.03, rel=0.15)
        layers = (tmp_path / "energy_layers.csv").read_text().splitlines()
        assert len(layers) == 2 + 8  # stamp + header + 8 layers

    def test_energy_cycle_ratio(self, tmp_path):
        rc = main(["energy", "--out", str(tmp_path / "b2")])
        assert rc == 0
        rc = main(["energy", "--out", str(tmp_path / "b1"),
                   "--set", "array.bits_per_cell", "1"])
        assert rc == 0
        r2 = json.loads((tmp_path / "b2" / "energy_report.json").read_text())
        r1 = json.loads((tmp_path / "b1" / "energy_report.json").read_text())
        assert r1["read_cycles"] == 2 * r2["read_cycles"]

    def test_infer_ideal(self, tmp_path):
        rc = main(["infer", "--out", str(tmp_path),
                   "--set", "inference.dataset", "synthetic:n=24,seed=7"])
        assert rc == 0
        rep = json.loads((tmp_path / "infer_report.json").read_text())
        assert rep["mode"] == "ideal-integer"
        assert rep["accuracy_mean"] > 0.8
        assert len(rep["per_layer"]) == 2

    def test_calibrate_and_dump(self, tmp_path):
        dump = tmp_path / "fit.ini"
        rc = main(["calibrate", "--out", str(tmp_path),
                   "--dump-calibration", str(dump)])
        assert rc == 0
        rep = json.loads((tmp_path / "calibration.json").read_text())
        assert abs(rep["ratio_residual"]) < 0.01
        cfg = load_config(str(dump))
        assert cfg.design().fefet.i_s == pytest.approx(rep["i_s"])

    def test_device_sweep_files(self, tmp_path):
        rc = main(["device-sweep", "--out", str(tmp_path),
                   "--set", "temperature.points", "2"])
        assert rc == 0
        files = sorted(tmp_path.glob("device_sweep_*.csv"))
        assert len(files) == 2
        lines = files[0].read_text().splitlines()
        assert lines[0].startswith("# config_hash=")
        assert lines[1].startswith("v_gs_v,")

    @pytest.mark.xfail(
        strict=True,
        reason="the shipped threshold placement is driven by the cell-level "
               "calibration; the raw transistor on/off separation at the "
               "read point exceeds the cell's fitted 238 (decisions ledger)")
    def test_device_sweep_separation_matches_cell_ratio(self, tmp_path):
        rc = main(["device-sweep", "--out", str(tmp_path),
                   "--set", "temperature.points", "1",
                   "--set", "temperature.t_min_c", "27",
                   "--set", "temperature.t_max_c", "27"])
        assert rc == 0
        path = next(iter(tmp_path.glob("device_sweep_*.csv")))
        rows = [l.split(",") for l in path.read_text().splitlines()[2:]]
        v = np.asarray([float(r[0]) for r in rows])
        i0 = np.asarray([float(r[1]) for r in rows])
        i1 = np.asarray([float(r[2]) for r in rows])
        at = int(np.argmin(np.abs(v - 0.35)))
        assert i1[at] / i0[at] == pytest.approx(238.0, rel=0.05)

    def test_unknown_mode_is_usage_error(self, tmp_path):
        r = run_cli(["infer", "--out", str(tmp_path),
                     "--set", "inference.mode", "bogus"])
        assert r.returncode == 2


class TestStatisticalInfer:
    def test_sigma_table_from_config(self, tmp_path):
        rc = main(["infer", "--out", str(tmp_path),
                   "--set", "inference.dataset", "synthetic:n=16,seed=7",
                   "--set", "inference.mode", "statistical-variance",
                   "--set", "inference.sigma_table", "1:0.05,2:0.05,3:0.05",
                   "--set", "inference.repeats", "2"])
        assert rc == 0
        rep = json.loads((tmp_path / "infer_report.json").read_text())
        assert rep["mode"] == "statistical-variance"
        assert rep["repeats"] == 2

    def test_bad_sigma_table_is_usage_error(self, tmp_path):
        r = run_cli(["infer", "--out", str(tmp_path),
                     "--set", "inference.sigma_table", "nonsense",
                     "--set", "inference.mode", "statistical-variance"])
        assert r.returncode == 2

    def test_perf_constants_file(self, tmp_path):
        from fecim.perf import dump_constants, calibrated_45nm

        p = tmp_path / "constants.ini"
        p.write_text(dump_constants(calibrated_45nm()))
        rc = main(["energy", "--out", str(tmp_path),
                   "--set", "perf.constants", str(p)])
        assert rc == 0
        rep = json.loads((tmp_path / "energy_report.json").read_text())
        assert rep["tops_per_watt"] == pytest.approx(48.03, rel=0.15)


class TestShippedConfigs:
    @pytest.mark.parametrize("name", ["cell-study.ini", "system-energy.ini",
                                      "inference-sweep.ini"])
    def test_configs_load(self, name):
        cfg = load_config(f"configs/{name}")
        assert cfg.seed == 12345

    def test_cell_study_runs(self, tmp_path):
        rc = main(["nmr", "--config", "configs/cell-study.ini",
                   "--out", str(tmp_path)])
        assert rc == 0

    def test_file_dataset_and_weights_end_to_end(self, tmp_path):
        from fecim import datasets

        x, y = datasets.synthetic_digits(12, seed=3)
        data = tmp_path / "digits.csv"
        datasets.save_csv_dataset(data, x, y)
        weights, _ = datasets.make_demo_network(seed=0)
        wpath = tmp_path / "weights.bin"
        datasets.save_weights_binary(wpath, weights)
        rc = main(["infer", "--out", str(tmp_path),
                   "--set", "inference.dataset", str(data),
                   "--set", "inference.weights", str(wpath)])
        assert rc == 0
        rep = json.loads((tmp_path / "infer_report.json").read_text())
        assert rep["accuracy_mean"] > 0.7


class TestThreads:
    def test_threads_flag_accepted(self, tmp_path):
        rc = main(["nmr", "--out", str(tmp_path), "--threads", "1",
                   "--set", "temperature.points", "3"])
        assert rc == 0

    def test_zero_threads_is_usage_error(self, tmp_path):
        r = run_cli(["nmr", "--out", str(tmp_path), "--threads", "0"])
        assert r.returncode == 2
