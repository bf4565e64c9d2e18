import json
import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from schwarzstatic import cli
from schwarzstatic.cli import (
    ConfigError,
    SweepConfig,
    emit,
    run_sweep,
    write_mode_profile,
)
from schwarzstatic.background import SchwarzschildParams
from schwarzstatic.modes import AsymptoticClass, AsymptoticKind, KernelVerdict

SMALL = dict(masses=[1.0], r0_offsets=[1.0], ell_max=2, r_max_factor=1e4)


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


class TestConfig:
    def test_defaults_give_108_tasks(self):
        config = SweepConfig()
        assert len(list(config.tasks())) == 108

    def test_rejects_empty_masses(self):
        with pytest.raises(ConfigError):
            SweepConfig(masses=[])

    def test_rejects_bad_decay_q(self):
        with pytest.raises(ConfigError):
            SweepConfig(decay_q=0.4)

    def test_rejects_nonpositive_offsets(self):
        with pytest.raises(ConfigError):
            SweepConfig(r0_offsets=[0.0, 1.0])

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError):
            SweepConfig.from_dict({"massess": [1.0]})


class TestRunSweep:
    def test_small_sweep_passes(self):
        report = run_sweep(SweepConfig(**SMALL))
        assert len(report.records) == 3
        assert report.all_passed
        classes = [r.class_name for r in report.records]
        assert classes[0] == "ConvergesNonzero"
        assert classes[1] == "DivergesPlus"

    def test_flat_single_record(self):
        report = run_sweep(
            SweepConfig(masses=[0.0], r0_offsets=[1.0], ell_max=0, r_max_factor=1e4)
        )
        assert report.all_passed
        assert report.records[0].class_name == "ConvergesNonzero"
        assert_allclose(report.records[0].fitted_limit, 1.0, rtol=1e-9)

    def test_parallel_matches_serial(self):
        config = SweepConfig(**SMALL)
        serial = run_sweep(config, jobs=1)
        parallel = run_sweep(config, jobs=2)
        for a, b in zip(serial.records, parallel.records):
            assert a.class_name == b.class_name
            assert a.fitted_limit == b.fitted_limit
            assert a.r_max == b.r_max


class TestEmit:
    def test_csv_and_json_layout(self, tmp_path):
        report = run_sweep(SweepConfig(**SMALL))
        paths = emit(report, str(tmp_path))
        lines = read_csv(paths[0])
        assert lines[0] == cli.CSV_HEADER
        assert len(lines) == len(report.records) + 1
        data = json.loads(open(paths[1], encoding="utf-8").read())
        assert data["schema_version"] == "1"
        assert data["config"]["masses"] == [1.0]
        assert len(data["records"]) == 3
        assert data["summary"]["all_passed"] is True

    def test_determinism_modulo_wall_time(self, tmp_path):
        config = SweepConfig(**SMALL)
        emit(run_sweep(config), str(tmp_path / "a"))
        emit(run_sweep(config), str(tmp_path / "b"))

        def strip_csv(path):
            return [ln.rsplit(",", 1)[0] for ln in read_csv(path)]

        assert strip_csv(tmp_path / "a" / "sweep.csv") == strip_csv(
            tmp_path / "b" / "sweep.csv"
        )

        def strip_json(path):
            data = json.loads(open(path, encoding="utf-8").read())
            for rec in data["records"]:
                rec.pop("wall_time_s")
            return data

        assert strip_json(tmp_path / "a" / "sweep.json") == strip_json(
            tmp_path / "b" / "sweep.json"
        )

    def test_csv_floats_round_trip(self, tmp_path):
        report = run_sweep(SweepConfig(**SMALL))
        paths = emit(report, str(tmp_path))
        line = read_csv(paths[0])[1].split(",")
        assert float(line[4]) == report.records[0].fitted_limit

    def test_profile_file(self, tmp_path):
        # l=1 profile: the final Phi value matches the log closed form
        # Phi(r) = alpha0 (l(l+1)/2m = 1/m here) [ln((r-2m)/r) - ln((r0-2m)/r0)]
        params = SchwarzschildParams(m=1.0, r0=3.0)
        path = write_mode_profile(str(tmp_path), params, ell=1)
        lines = read_csv(path)
        assert lines[0] == "r,a,da,A,phi,Phi"
        last = lines[-1].split(",")
        r_end, phi_end = float(last[0]), float(last[5])
        expect = 1.5 * (np.log((r_end - 2.0) / r_end) + np.log(3.0))
        assert abs(phi_end - expect) <= 1e-4

    def test_profile_filename_template(self, tmp_path):
        params = SchwarzschildParams(m=-0.25, r0=1.0)
        path = write_mode_profile(str(tmp_path), params, ell=3, r_max_factor=1e3)
        assert os.path.basename(path) == "mode_m-0.25_r01_l3.csv"


class TestMainEntry:
    def test_sweep_exit_zero(self, tmp_path, capsys):
        code = cli.main(
            [
                "sweep", "--masses", "1.0", "--deltas", "1.0",
                "--ell-max", "1", "--r-max-factor", "10000",
                "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        assert (tmp_path / "sweep.csv").exists()

    def test_empty_mass_list_is_usage_error(self, tmp_path):
        code = cli.main(["sweep", "--masses", "", "--out-dir", str(tmp_path)])
        assert code == 1

    def test_bad_config_file(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        assert cli.main(["sweep", "--config", str(cfg)]) == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"masss": [1.0]}))
        assert cli.main(["sweep", "--config", str(cfg)]) == 1

    def test_config_file_with_overrides(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"masses": [1.0], "r0_offsets": [1.0]}))
        code = cli.main(
            [
                "sweep", "--config", str(cfg), "--ell-max", "0",
                "--r-max-factor", "10000", "--out-dir", str(tmp_path),
            ]
        )
        assert code == 0
        data = json.loads((tmp_path / "sweep.json").read_text())
        assert data["config"]["ell_max"] == 0

    def test_failing_record_gives_exit_two(self, tmp_path, monkeypatch):
        params = SchwarzschildParams(m=1.0, r0=3.0)
        fake = KernelVerdict(
            params=params, ell=0,
            klass=AsymptoticClass(AsymptoticKind.UNDETERMINED, 0.0, 0.0, 1.0),
            passed=False, flat_branch=False,
        )
        monkeypatch.setattr(cli, "verify_kernel_trivial", lambda *a, **k: fake)
        code = cli.main(
            ["sweep", "--masses", "1.0", "--deltas", "1.0", "--ell-max", "0",
             "--out-dir", str(tmp_path)]
        )
        assert code == 2

    def test_match_round_cli(self, capsys):
        assert cli.main(["match-round", "--rho", "1", "--h", "2", "--json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["m"] == 0.0
        assert out["horizon_degenerate"] is False

    def test_mode_cli(self, tmp_path, capsys):
        code = cli.main(
            ["mode", "--m", "1", "--r0", "3", "--ell", "0",
             "--r-max-factor", "10000", "--out-dir", str(tmp_path)]
        )
        assert code == 0
        assert "ConvergesNonzero" in capsys.readouterr().out

    def test_mode_cli_rejects_bad_params(self, tmp_path):
        code = cli.main(
            ["mode", "--m", "1", "--r0", "1", "--ell", "0", "--out-dir", str(tmp_path)]
        )
        assert code == 1

    def test_env_seed_override(self, monkeypatch):
        monkeypatch.setenv("SCHWARZSTATIC_SEED", "7")
        assert cli._resolved_seed(None, 0) == 7
        assert cli._resolved_seed(3, 0) == 3
        monkeypatch.setenv("SCHWARZSTATIC_SEED", "x")
        with pytest.raises(ConfigError):
            cli._resolved_seed(None, 0)


class TestInstalledEntryPoint:
    def test_subprocess_usage_error_exit_one(self):
        proc = subprocess.run(
            [sys.executable, "-m", "schwarzstatic.cli", "sweep", "--masses", ""],
            capture_output=True,
        )
        assert proc.returncode == 1

    def test_subprocess_unknown_subcommand(self):
        proc = subprocess.run(
            [sys.executable, "-m", "schwarzstatic.cli", "bogus"],
            capture_output=True,
        )
        assert proc.returncode == 1
