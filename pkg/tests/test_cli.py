import numpy as np
import pytest

from gradproj.cli import EXIT_ERROR, EXIT_MAX_ITER, EXIT_OK, EXIT_SUITE_FAIL, main
from gradproj.traceio import read_trace


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestRun:
    def test_converged(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.ini", "problem = quad\nalgorithm = gpa1\n")
        out = tmp_path / "t.jsonl"
        assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
        line = capsys.readouterr().out
        assert "termination=converged" in line and "fitted_q=" in line
        head, rows = read_trace(out)
        assert head["config"]["problem"] == "quad" and head["problem"]["f0"] == 1.0
        assert rows

    def test_max_iter(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.ini", "problem = quad\nalgorithm = gpa1\nmax_iter = 2\n")
        assert main(["run", "--config", cfg]) == EXIT_MAX_ITER
        assert "termination=max_iter" in capsys.readouterr().out

    def test_validation_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.ini", "problem = minstat\nalgorithm = gpa3\n")
        assert main(["run", "--config", cfg]) == EXIT_ERROR
        assert "algorithm" in capsys.readouterr().err

    def test_parse_error(self, tmp_path, capsys):
        cfg = write(tmp_path, "c.ini", "problem = quad\nwhat = 1\n")
        assert main(["run", "--config", cfg]) == EXIT_ERROR
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.ini")]) == EXIT_ERROR

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            main(["run"])
        assert info.value.code == EXIT_ERROR


class TestEigmin:
    def test_against_lapack(self, tmp_path, capsys):
        rng = np.random.default_rng(7)
        B = rng.standard_normal((5, 5))
        A = B + B.T
        path = tmp_path / "a.txt"
        np.savetxt(path, A, fmt="%.17g")
        out = tmp_path / "e.csv"
        assert main(["eigmin", "--matrix", str(path), "--out", str(out), "--format", "csv"]) == EXIT_OK
        first = capsys.readouterr().out.splitlines()[0]
        lam = float(first.split()[0].split("=")[1])
        assert lam == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-8)
        assert (tmp_path / "e.csv.header.json").exists()

    def test_bad_matrix(self, tmp_path, capsys):
        path = write(tmp_path, "a.txt", "1 2\n0 1\n")
        assert main(["eigmin", "--matrix", path]) == EXIT_ERROR
        assert "NotSymmetric" in capsys.readouterr().err


class TestSuiteAndLpl:
    def test_filter(self, capsys):
        assert main(["suite", "--filter", "ffw-theta-calculator"]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 1 and out[0].startswith("PASS ffw-theta-calculator")

    def test_unknown_filter(self):
        assert main(["suite", "--filter", "nope"]) == EXIT_ERROR

    def test_estimate_lpl(self, capsys):
        code = main(["estimate-lpl", "--problem", "quad:diag=1,2,10", "--samples", "500", "--tau", "0.5"])
        assert code == EXIT_OK
        mu = float(capsys.readouterr().out.split()[0].split("=")[1])
        assert mu >= 1.0 - 1e-9

    def test_estimate_lpl_without_f0(self, capsys):
        assert main(["estimate-lpl", "--problem", "ballwave"]) == EXIT_ERROR


def test_exit_code_constants():
    assert (EXIT_OK, EXIT_SUITE_FAIL, EXIT_MAX_ITER, EXIT_ERROR) == (0, 1, 2, 3)
