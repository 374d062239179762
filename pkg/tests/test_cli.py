import json

import numpy as np
import pytest
import scipy.sparse as sp

from gramian_rk.cli import run
from gramian_rk.mmio import read_matrix_market, write_matrix_market
from gramian_rk.oracle import dense_lyapunov, dense_sylvester
from gramian_rk.tableau import gauss_legendre

from conftest import random_antistable, random_stable, rel


@pytest.fixture
def lyap_files(tmp_path, rng):
    A = random_stable(rng, 12)
    b = rng.standard_normal((12, 1))
    write_matrix_market(tmp_path / "A.mtx", A)
    write_matrix_market(tmp_path / "b.mtx", b)
    return tmp_path, A, b


def args(tmp_path, *extra):
    return ["solve-lyap", "--A", str(tmp_path / "A.mtx"), "--B", str(tmp_path / "b.mtx"), *extra]


def test_solve_lyap_auto(lyap_files):
    tmp, A, b = lyap_files
    out = str(tmp / "run1")
    assert run(args(tmp, "--shifts", "auto:20", "--tol", "1e-8", "--out", out)) == 0
    Z = read_matrix_market(tmp / "run1_Z.mtx")
    assert rel(Z @ Z.conj().T, dense_lyapunov(A, b).matrix) <= 1e-3
    rep = json.loads((tmp / "run1_report.json").read_text())
    assert rep["converged"] and rep["final_residual"] <= 1e-8
    assert {"shifts", "steps", "final_residual", "wall_time"} <= rep.keys()
    rows = (tmp / "run1_residual.csv").read_text().splitlines()
    assert rows[0] == "step,shift_re,shift_im,residual"
    assert [int(r.split(",")[0]) for r in rows[1:]] == list(range(1, rep["steps"] + 1))


def test_deterministic_outputs(lyap_files):
    tmp, _, _ = lyap_files
    for name in ("x", "y"):
        assert run(args(tmp, "--shifts", "auto:10", "--out", str(tmp / name))) in (0, 2)
    assert (tmp / "x_Z.mtx").read_bytes() == (tmp / "y_Z.mtx").read_bytes()
    rx = json.loads((tmp / "x_report.json").read_text())
    ry = json.loads((tmp / "y_report.json").read_text())
    rx.pop("wall_time"), ry.pop("wall_time")
    assert rx == ry


def test_realify_and_adi(lyap_files):
    tmp, A, b = lyap_files
    (tmp / "sh.txt").write_text("1 1\n1 -1\n0.5 0\n2 0.5\n2 -0.5\n")
    common = ["--shifts", f"file:{tmp / 'sh.txt'}", "--tol", "1e-12", "--max-steps", "40"]
    assert run(args(tmp, *common, "--realify", "--out", str(tmp / "r"))) in (0, 2)
    assert "real" in (tmp / "r_Z.mtx").read_text().splitlines()[0]
    assert run(args(tmp, *common, "--realify", "--method", "adi", "--out", str(tmp / "a"))) in (0, 2)
    Zr, Za = read_matrix_market(tmp / "r_Z.mtx"), read_matrix_market(tmp / "a_Z.mtx")
    assert rel(Za @ Za.T, Zr @ Zr.T) <= 1e-10


def test_realify_improper(lyap_files, capsys):
    tmp, _, _ = lyap_files
    (tmp / "bad.txt").write_text("1 1\n0.5 0\n")
    code = run(args(tmp, "--shifts", f"file:{tmp / 'bad.txt'}", "--realify", "--out", str(tmp / "z")))
    assert code == 1
    assert "(1+1j)" in capsys.readouterr().err


def test_not_converged_exit_2(lyap_files):
    tmp, _, _ = lyap_files
    assert run(args(tmp, "--shifts", "eig:2", "--max-steps", "2", "--tol", "1e-14", "--out", str(tmp / "p"))) == 2
    assert (tmp / "p_Z.mtx").exists() and (tmp / "p_report.json").exists()


def test_tableau_file(lyap_files):
    tmp, _, _ = lyap_files
    (tmp / "gl2.txt").write_text(gauss_legendre(2).to_text())
    assert run(args(tmp, "--tableau-file", str(tmp / "gl2.txt"), "--max-steps", "3", "--out", str(tmp / "t"))) in (0, 2)
    assert read_matrix_market(tmp / "t_Z.mtx").shape == (12, 6)


def test_input_errors(lyap_files, tmp_path):
    tmp, _, _ = lyap_files
    assert run(["solve-lyap", "--A", str(tmp / "missing.mtx"), "--B", str(tmp / "b.mtx"), "--out", str(tmp / "o")]) == 1
    assert run(args(tmp, "--shifts", "bogus", "--out", str(tmp / "o"))) == 1
    (tmp / "trunc.mtx").write_text("%%MatrixMarket matrix array real general\n2 2\n1\n")
    assert run(["solve-lyap", "--A", str(tmp / "trunc.mtx"), "--B", str(tmp / "b.mtx"), "--out", str(tmp / "o")]) == 1
    assert run(["no-such-command"]) == 1


def test_verify(lyap_files, capsys):
    tmp, _, _ = lyap_files
    assert run(args(tmp, "--shifts", "eig:12", "--tol", "1e-14", "--out", str(tmp / "v"))) == 0
    capsys.readouterr()
    assert run(["verify", "--A", str(tmp / "A.mtx"), "--B", str(tmp / "b.mtx"), "--Z", str(tmp / "v_Z.mtx")]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(out["oracle_error"]) <= 1e-8
    assert float(out["relative_residual"]) <= 1e-8


def test_solve_sylv_and_verify(tmp_path, rng, capsys):
    A, B = random_stable(rng, 10), random_antistable(rng, 8)
    F, G = rng.standard_normal((10, 1)), rng.standard_normal((8, 1))
    for name, M in {"A": A, "B": B, "F": F, "G": G}.items():
        write_matrix_market(tmp_path / f"{name}.mtx", M)
    base = ["--A", str(tmp_path / "A.mtx"), "--B", str(tmp_path / "B.mtx")]
    fg = ["--F", str(tmp_path / "F.mtx"), "--G", str(tmp_path / "G.mtx")]
    code = run(["solve-sylv", *base, *fg, "--shifts", "auto:10", "--tol", "1e-10", "--out", str(tmp_path / "s")])
    assert code == 0
    Zh = read_matrix_market(tmp_path / "s_Z.mtx")
    Zb = read_matrix_market(tmp_path / "s_Zbreve.mtx")
    gamma = np.array([complex(*map(float, ln.split())) for ln in (tmp_path / "s_Gamma.txt").read_text().splitlines()])
    Y = (Zh * gamma) @ Zb.conj().T
    assert rel(Y, dense_sylvester(A, B, F, G).matrix) <= 1e-6
    header = (tmp_path / "s_residual.csv").read_text().splitlines()[0]
    assert header == "step,mu_hat_re,mu_hat_im,mu_breve_re,mu_breve_im,residual"
    capsys.readouterr()
    extra = ["--Z", str(tmp_path / "s_Z.mtx"), "--Zbreve", str(tmp_path / "s_Zbreve.mtx"), "--Gamma", str(tmp_path / "s_Gamma.txt")]
    assert run(["verify", *base, *fg, *extra]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(out["oracle_error"]) <= 1e-6


def test_shifts_command(tmp_path, capsys):
    n = 50
    A = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr")
    write_matrix_market(tmp_path / "L.mtx", A)
    assert run(["shifts", "--A", str(tmp_path / "L.mtx"), "--shifts", "auto:8"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert 0 < len(lines) <= 8
    assert all(float(ln.split()[0]) > 0 and float(ln.split()[1]) == 0 for ln in lines)


def test_sparse_input(tmp_path, rng):
    n = 60
    A = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="csr")
    write_matrix_market(tmp_path / "A.mtx", A)
    write_matrix_market(tmp_path / "b.mtx", np.ones((n, 1)))
    assert run(args(tmp_path, "--shifts", "auto:30", "--tol", "1e-6", "--max-steps", "60", "--out", str(tmp_path / "o"))) == 0
