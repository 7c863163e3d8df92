import numpy as np
import pytest

from vkdshell import io as vio
from vkdshell.cli import main

SMALL = ["--a", "20", "--b", "20", "--dx", "0.5"]


def _summary(out):
    line = [ln for ln in out.splitlines() if ln.startswith("method=")][-1]
    return {k: v for k, v in (kv.split("=", 1) for kv in line.split())}


def test_invalid_load_exits_with_validation_code(capsys):
    assert main(["mpa", "--lambda", "2.5"]) == 2
    assert "ValidationError" in capsys.readouterr().err


def test_missing_arguments(capsys, tmp_path):
    assert main(["csdm", "--out", str(tmp_path)]) == 2
    assert main(["cmpa", "--C", "40", "--out", str(tmp_path)]) == 2
    assert main(["newton-lambda", "--lambda", "1.4", "--start", str(tmp_path / "none.field")]) == 2


def test_solver_failure_exit_code(capsys, tmp_path):
    # spectral full-domain grid is fine, but a flat path has no mountain
    g = ["--a", "6", "--b", "6", "--dx", "1.0"]
    z = tmp_path / "z.field"
    from vkdshell.grid import grid_from_step

    grid = grid_from_step(6, 6, 1.0)
    vio.save_field(np.zeros(grid.size), z, grid)
    code = main(["mpa", *g, "--lambda", "1.4", "--w2", str(z), "--out", str(tmp_path), "--p", "4"])
    assert code == 3
    assert "DegeneratePath" in capsys.readouterr().err


def test_mpa_then_newton_and_continuation(tmp_path, capsys):
    assert main(["mpa", *SMALL, "--lambda", "1.4", "--out", str(tmp_path)]) == 0
    s = _summary(capsys.readouterr().out)
    assert s["method"] == "Newton-lambda"
    assert float(s["F"]) == pytest.approx(float(s["E"]) - 1.4 * float(s["S"]), rel=1e-12)
    for name in ("mpa.field", "mpa_phi.field", "mpa_w2.field", "mpa_iterations.csv", "sdm_iterations.csv", "newton_iterations.csv"):
        assert (tmp_path / name).is_file()
    header, rows = vio.read_csv(tmp_path / "mpa_iterations.csv")
    assert header == ["iteration", "objective", "grad_norm"] and len(rows) > 10

    assert main(["newton-lambda", *SMALL, "--lambda", "1.4", "--start", str(tmp_path / "mpa.field"), "--out", str(tmp_path / "n")]) == 0
    n = _summary(capsys.readouterr().out)
    assert n["iterations"] == "0" and float(n["E"]) == pytest.approx(float(s["E"]), rel=1e-12)

    code = main(["continue", *SMALL, "--lambda", "1.4", "--start", str(tmp_path / "mpa.field"), "--s-max", "1.0", "--ds", "0.5", "--out", str(tmp_path / "c")])
    assert code == 0
    br = vio.read_branch(tmp_path / "c" / "branch.csv")
    assert br.shape[0] >= 2 and np.all(np.diff(br[:, 0]) > 0)


def test_csdm_newton_s_and_determinism(tmp_path, capsys):
    args = ["csdm", *SMALL, "--C", "20", "--seed", "single-peak"]
    assert main([*args, "--out", str(tmp_path / "a")]) == 0
    s1 = _summary(capsys.readouterr().out)
    assert main([*args, "--out", str(tmp_path / "b")]) == 0
    s2 = _summary(capsys.readouterr().out)
    assert s1 == s2
    assert (tmp_path / "a" / "csdm.field").read_bytes() == (tmp_path / "b" / "csdm.field").read_bytes()
    assert s1["method"] == "Newton-S" and float(s1["S"]) == pytest.approx(20.0, rel=1e-10)
    code = main(["newton-s", *SMALL, "--C", "20", "--start", str(tmp_path / "a" / "csdm.field"), "--out", str(tmp_path / "c")])
    assert code == 0
    assert float(_summary(capsys.readouterr().out)["lambda"]) == pytest.approx(float(s1["lambda"]), rel=1e-9)


def test_seed_file(tmp_path, capsys):
    cat = tmp_path / "seeds.json"
    cat.write_text('{"pair": [[1.0, 6.0, [0.0, 0.0]], [1.0, 6.0, [0.0, -12.0]]]}')
    assert main(["csdm", *SMALL, "--C", "20", "--seed", "pair", "--seed-file", str(cat), "--no-polish", "--max-iter", "20", "--out", str(tmp_path)]) == 0
    assert main(["csdm", *SMALL, "--C", "20", "--seed", "nope", "--seed-file", str(cat), "--out", str(tmp_path)]) == 2
