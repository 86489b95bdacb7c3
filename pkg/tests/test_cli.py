import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from spatialsign import cli
from spatialsign.errors import NumericalFailureError
from spatialsign.signcore import EstimationConfig, ss_test


@pytest.fixture
def sample_csv(tmp_path):
    X = np.random.default_rng(3).standard_normal((15, 6)) + 0.8
    path = tmp_path / "x.csv"
    header = ",".join(f"v{k}" for k in range(6))
    np.savetxt(path, X, delimiter=",", header=header, comments="")
    return path, X


def _json(capsys):
    return json.loads(capsys.readouterr().out)


class TestTestCommand:
    @pytest.mark.parametrize("mode", ["exact", "plugin"])
    def test_json_matches_library(self, sample_csv, capsys, mode):
        path, X = sample_csv
        rc = cli.main(["test", "--input", str(path), "--header", "--mode", mode, "--output", "json"])
        assert rc == 0
        got = _json(capsys)
        want = ss_test(X, 0.05, EstimationConfig(mode=mode))
        assert got["z"] == pytest.approx(want.z, rel=1e-12)
        assert got["reject"] == want.reject and got["mode"] == mode

    def test_text_output(self, sample_csv, capsys):
        path, _ = sample_csv
        assert cli.main(["test", "--input", str(path), "--header", "--mode", "plugin"]) == 0
        out = capsys.readouterr().out
        assert "p_value:" in out and "reject:" in out

    def test_header_line_without_flag_is_invalid(self, sample_csv, capsys):
        path, _ = sample_csv
        assert cli.main(["test", "--input", str(path)]) == 1
        assert "error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert cli.main(["test", "--input", str(tmp_path / "none.csv")]) == 1

    def test_too_few_rows_for_exact(self, tmp_path):
        path = tmp_path / "small.csv"
        np.savetxt(path, np.random.default_rng(0).standard_normal((5, 4)), delimiter=",")
        assert cli.main(["test", "--input", str(path)]) == 1
        assert cli.main(["test", "--input", str(path), "--mode", "plugin"]) == 0

    def test_nonconvergence_warns(self, sample_csv, capsys):
        path, _ = sample_csv
        rc = cli.main(["test", "--input", str(path), "--header", "--mode", "plugin", "--max-iter", "1"])
        assert rc == 0
        assert "did not converge" in capsys.readouterr().err

    def test_numerical_failure_exit_code(self, sample_csv, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalFailureError("non-positive trace estimate")

        monkeypatch.setattr(cli, "ss_test", boom)
        path, _ = sample_csv
        assert cli.main(["test", "--input", str(path), "--header"]) == 2
        assert "numerical failure" in capsys.readouterr().err


class TestOtherCommands:
    def test_simulate_csv(self, capsys):
        rc = cli.main(["simulate", "--scenario", "II", "--n", "20", "--p", "40", "--reps", "4", "--seed", "9"])
        assert rc == 0
        rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
        assert len(rows) == 1 and rows[0]["scenario"] == "II" and rows[0]["reps"] == "4"

    def test_simulate_table(self, capsys):
        rc = cli.main(["simulate", "--scenario", "I", "--n", "20", "--p", "40", "--pattern", "dense",
                       "--reps", "3", "--format", "table"])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1] == "Scenario I" and lines[2].split()[2] == "-"

    def test_simulate_needs_cell(self, capsys):
        assert cli.main(["simulate", "--scenario", "I"]) == 1
        assert "--n" in capsys.readouterr().err

    def test_diag(self, capsys):
        assert cli.main(["diag", "--p", "200", "--rho", "0", "--n", "50"]) == 0
        d = _json(capsys)
        assert d["c1_ratio"] == pytest.approx(0.005) and d["c2_ratio"] == pytest.approx(0.08)

    def test_are_closed_form(self, capsys):
        assert cli.main(["are", "--nu", "4"]) == 0
        assert _json(capsys)["are"] == pytest.approx(1.7671, abs=1e-4)

    def test_are_monte_carlo(self, capsys):
        assert cli.main(["are", "--family", "normal", "--p", "50", "--draws", "2000"]) == 0
        assert _json(capsys)["are"] == pytest.approx(1.0, abs=0.1)

    def test_are_invalid(self):
        assert cli.main(["are", "--nu", "2"]) == 1
        assert cli.main(["are"]) == 1
        assert cli.main(["are", "--family", "normal"]) == 1

    def test_power(self, capsys):
        assert cli.main(["power", "--formula", "ss", "--params", "n=100", "p=200", "zeta=0"]) == 0
        assert _json(capsys)["power"] == pytest.approx(0.05)
        assert cli.main(["power", "--formula", "wpl", "--params", "n=100", "p=200", "zeta=0.05",
                         "tau1_sq=1", "tau2_sq=10", "regime=tau2_dominant"]) == 0
        assert _json(capsys)["are_rn_wpl"] == pytest.approx(7.0711, abs=1e-4)

    def test_power_bad_params(self):
        assert cli.main(["power", "--formula", "ss", "--params", "n=100"]) == 1
        assert cli.main(["power", "--formula", "ss", "--params", "n=100", "p=200", "bogus=1"]) == 1
        assert cli.main(["power", "--formula", "ss", "--params", "n=x", "p=200"]) == 1

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["nope"])
        assert exc.value.code == 1

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "spatialsign", "are", "--nu", "3"],
                              capture_output=True, text=True, check=False)
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["are"] == pytest.approx(8 / np.pi)
