import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from orthorec.cli import cell_filename, main


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestRun:
    def test_clean_run(self, tmp_path):
        cfg = _write(tmp_path / "c.json", {"experiment": "chebyshev", "m": 16, "ell": 5,
                                          "methods": ["implicit1", "eigenvector"]})
        out = tmp_path / "out"
        assert main(["run", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        rows = _read_csv(out / "implicit1.csv")
        assert rows[0] == ["k", "err_o", "err_r", "err_w", "err_node"]
        assert [int(r[0]) for r in rows[1:]] == list(range(6))
        assert (out / "eigenvector_conditions.csv").exists()
        man = json.loads((out / "manifest.json").read_text())
        assert man["status"] == "clean" and man["config"]["m"] == 16

    def test_rational_columns(self, tmp_path):
        cfg = _write(tmp_path / "c.json", {"experiment": "unit_circle_rational", "m": 9, "ell": 2,
                                          "methods": ["implicit1"]})
        assert main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 0
        assert _read_csv(tmp_path / "implicit1.csv")[0][-1] == "err_p"

    def test_partial_run(self, tmp_path, capsys):
        cfg = _write(tmp_path / "c.json", {"experiment": "chebyshev", "m": 16, "ell": 3,
                                          "methods": ["eigenvector"], "n_ir": 0, "gate": 1e-30})
        assert main(["run", "--config", cfg, "--out", str(tmp_path), "--quiet"]) == 2
        assert "breakdown" in capsys.readouterr().err
        man = json.loads((tmp_path / "manifest.json").read_text())
        assert man["status"] == "partial" and man["events"][0]["k"] == 1

    @pytest.mark.parametrize("content", ['{"experiment": "nope"}', "not json", '{"experiment": "chebyshev", "m": 0}'])
    def test_config_errors(self, tmp_path, content, capsys):
        p = tmp_path / "c.json"
        p.write_text(content)
        assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1

    def test_byte_identical(self, tmp_path):
        cfg = _write(tmp_path / "c.json", {"experiment": "equidistant", "m": 12, "ell": 3, "n_ir": 1, "b": 1})
        for d in ("a", "b"):
            assert main(["run", "--config", cfg, "--out", str(tmp_path / d), "--quiet"]) == 0
        for name in ("explicit1.csv", "eigenvector.csv", "eigenvector_conditions.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestGolden:
    def test_prints_scalars(self, capsys):
        assert main(["golden", "--experiment", "unit_circle_poly", "--m", "16", "--ell", "8"]) == 0
        out = capsys.readouterr().out
        assert "unitarity=" in out and "beyond_tridiagonal=" in out
        assert out.count("completed") == 4

    def test_unknown_experiment(self):
        assert main(["golden", "--experiment", "nope"]) == 1

    def test_bad_override(self):
        assert main(["golden", "--experiment", "chebyshev", "--m", "1"]) == 1


class TestLsq:
    @pytest.fixture
    def data(self, tmp_path):
        x = np.linspace(0, 1, 8)
        f = 1 + 2 * x
        p = tmp_path / "d.csv"
        lines = ["z_re,z_im,w_re,w_im,f_re,f_im"] + [f"{a},0,1,0,{b},0" for a, b in zip(x, f)]
        p.write_text("\n".join(lines) + "\n")
        return p

    def test_polynomial(self, data, tmp_path):
        out = tmp_path / "coef.json"
        assert main(["lsq", "--data", str(data), "--n", "2", "--out", str(out)]) == 0
        d = json.loads(out.read_text())
        assert d["n"] == 2

    def test_rational_stdout(self, data, capsys):
        assert main(["lsq", "--data", str(data), "--n", "3", "--poles", "3,inf,-2+1j,inf,inf,inf,inf"]) == 0
        assert json.loads(capsys.readouterr().out)["n"] == 3

    def test_errors(self, data, tmp_path):
        assert main(["lsq", "--data", str(data), "--n", "9"]) == 1
        assert main(["lsq", "--data", str(data), "--poles", "1,2"]) == 1
        assert main(["lsq", "--data", str(tmp_path / "missing.csv")]) == 1


def test_no_command():
    assert main([]) == 1


def test_help_exits_cleanly():
    assert main(["--help"]) == 0


def test_cell_filename():
    assert cell_filename("rational:implicit1") == "rational-implicit1"


@pytest.mark.skipif(shutil.which("orthorec") is None, reason="console script not installed")
def test_console_script(tmp_path):
    res = subprocess.run(["orthorec", "golden", "--experiment", "chebyshev", "--m", "12", "--ell", "3"],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr


def test_module_entry():
    res = subprocess.run([sys.executable, "-m", "orthorec.cli", "golden", "--experiment", "nope"],
                         capture_output=True, text=True)
    assert res.returncode == 1
