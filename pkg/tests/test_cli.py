import math
import subprocess
import sys

import numpy as np
import pytest

from globalcurves.cli import EXIT_CONFIG, EXIT_FIRST_POINT, EXIT_NEWTON, EXIT_OK, main
from globalcurves.report import read_csv, read_svg_polylines


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def rows(text):
    cols, branches, comments = read_csv(text)
    return cols, [[float(v) if i < 2 else v for i, v in enumerate(r)] for b in branches for r in b], comments


def test_dirichlet_linear_run(tmp_path, capsys):
    cfg = write(tmp_path, "d.ini", "[dirichlet]\nf = u\nn = 3\ngrid = 0, 1, 10\n")
    assert main(["run", cfg]) == EXIT_OK
    cols, data, comments = rows(capsys.readouterr().out)
    assert cols == ["alpha", "lambda", "terminal"]
    assert len(data) == 10
    assert all(abs(r[1] - math.pi**2) < 1e-6 for r in data)
    assert comments[-1].startswith("status: ok")


def test_beam_constant_run(tmp_path, capsys):
    cfg = write(tmp_path, "b.ini", "[beam]\nf = 1\ngrid = 0, 0.5, 4\n")
    assert main(["run", cfg]) == EXIT_OK
    cols, data, _ = rows(capsys.readouterr().out)
    assert cols == ["alpha", "lambda", "beta"]
    for a, lam, beta in data:
        assert lam == pytest.approx(24 * a, abs=1e-9)
        assert float(beta) == pytest.approx(-4 * a, abs=1e-9)


def test_csv_is_bit_stable_and_independent_of_jobs(tmp_path):
    cfg = write(tmp_path, "o.ini", "[dirichlet]\nf = u + 0.5*u*sin(u)\nn = 3\ngrid = 0, 0.7, 12\n")
    outs = []
    for i, jobs in enumerate(("1", "1", "3")):
        path = tmp_path / f"o{i}.csv"
        assert main(["run", cfg, "--jobs", jobs, "--csv", str(path)]) == EXIT_OK
        outs.append(path.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_outputs_from_config_section(tmp_path):
    cfg = write(tmp_path, "p.ini", "[plaplace]\nf = 1\nn = 1\np = 4\ngrid = 0, 0.5, 4\n[output]\ncsv = p.csv\nsvg = p.svg\nfigure = p.png\n")
    assert main(["run", cfg]) == EXIT_OK
    _, data, _ = rows((tmp_path / "p.csv").read_text())
    assert [r[1] for r in data] == pytest.approx([(4 * r[0] / 3) ** 3 for r in data], rel=1e-7)
    polys = read_svg_polylines((tmp_path / "p.svg").read_text())
    assert np.array_equal(polys[0], np.array([[r[1], r[0]] for r in data]))
    assert (tmp_path / "p.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_command_line_overrides(tmp_path, capsys):
    cfg = write(tmp_path, "p.ini", "[plaplace]\nf = exp(u)\nn = 5\np = 4\ngrid = 0, 0.5, 2\n")
    assert main(["run", cfg, "--mode", "naive", "--tol-rel", "1e-11", "--tol-abs", "1e-13"]) == EXIT_OK
    _, naive, _ = rows(capsys.readouterr().out)
    assert main(["run", cfg]) == EXIT_OK
    _, reg, _ = rows(capsys.readouterr().out)
    assert [r[1] for r in naive] == pytest.approx([r[1] for r in reg], rel=1e-4)


def test_config_error_exit(tmp_path, capsys):
    cfg = write(tmp_path, "bad.ini", "[dirichlet]\nf = u\ngrid = 0, 1, 2\ncolour = red\n")
    assert main(["run", cfg]) == EXIT_CONFIG
    assert "colour" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    ok = write(tmp_path, "ok.ini", "[dirichlet]\nf = u\ngrid = 0, 1, 2\n")
    assert main(["run", ok, "--seed-lambda", "3"]) == EXIT_CONFIG
    assert main(["run", ok, "--jobs", "0"]) == EXIT_CONFIG
    assert main(["run", ok, "--tol-rel", "-1"]) == EXIT_CONFIG


def test_empty_curve_exit(tmp_path):
    # u - u^3 never reaches a v' root with v > 0 first, so there is no Neumann solution
    cfg = write(tmp_path, "n.ini", "[neumann]\nf = u - u^3\nn = 1\ngrid = 0, 0.1, 5\n")
    out = tmp_path / "n.csv"
    assert main(["run", cfg, "--csv", str(out)]) == EXIT_FIRST_POINT
    assert out.read_text().splitlines()[-1].startswith("# status: failed")


def test_first_point_newton_failure_exit(tmp_path):
    cfg = write(tmp_path, "g.ini", "[nonauto]\nf = exp(u)\nn = 3\ngrid = 0, 0.1, 3\nlambda_init = -50\n")
    out = tmp_path / "g.csv"
    assert main(["run", cfg, "--csv", str(out)]) == EXIT_FIRST_POINT
    assert "failed at the first grid point" in out.read_text()


def test_profile_newton_failure_exit(tmp_path):
    cfg = write(tmp_path, "g.ini", "[nonauto]\nf = exp(u)\nn = 3\ngrid = 0, 0.1, 3\n")
    assert main(["profile", cfg, "--at", "0.05", "--seed-lambda", "-50"]) == EXIT_NEWTON


def test_profile_sinc(tmp_path, capsys):
    cfg = write(tmp_path, "d.ini", "[dirichlet]\nf = u\nn = 3\ngrid = 0, 1, 3\n")
    assert main(["profile", cfg, "--at", "2"]) == EXIT_OK
    cols, data, comments = rows(capsys.readouterr().out)
    assert cols == ["r", "u"] and len(data) == 401
    r = np.array([d[0] for d in data])
    u = np.array([d[1] for d in data])
    assert np.max(np.abs(u - 2 * np.sinc(r))) < 1e-8
    assert "alpha = 2" in comments


def test_profile_beam(tmp_path, capsys):
    cfg = write(tmp_path, "b.ini", "[beam]\nf = 1\ngrid = 0, 0.25, 8\n")
    fig = tmp_path / "b.png"
    assert main(["profile", cfg, "--at", "1", "--figure", str(fig)]) == EXIT_OK
    cols, data, _ = rows(capsys.readouterr().out)
    x = np.array([d[0] for d in data])
    u = np.array([d[1] for d in data])
    assert cols == ["x", "u"]
    assert np.max(np.abs(u - (1 - x * x) ** 2)) < 1e-10
    assert fig.exists()


def test_profile_no_solution_exit(tmp_path):
    cfg = write(tmp_path, "n.ini", "[neumann]\nf = u\nn = 3\ngrid = 0, 1, 3\n")
    assert main(["profile", cfg, "--at", "1"]) == EXIT_FIRST_POINT


def test_profile_harmonic(tmp_path, capsys):
    cfg = write(tmp_path, "h.ini", "[harmonic]\nf = 2*u\ngrid = 0, 0.5, 3\n")
    assert main(["profile", cfg, "--at", str(math.pi / 2)]) == EXIT_OK
    _, data, comments = rows(capsys.readouterr().out)
    x = np.array([d[0] for d in data])
    assert np.max(np.abs(np.array([d[1] for d in data]) - np.sin(x))) < 1e-9
    assert any(c.startswith("mu = 1") or c.startswith("mu = 0.99999") for c in comments)


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "d.ini", "[dirichlet]\nf = 1\nn = 1\ngrid = 0, 1, 2\n")
    res = subprocess.run([sys.executable, "-m", "globalcurves", "run", cfg], capture_output=True, text=True)
    assert res.returncode == 0
    _, data, _ = rows(res.stdout)
    assert [r[1] for r in data] == pytest.approx([2.0, 4.0], abs=1e-8)
