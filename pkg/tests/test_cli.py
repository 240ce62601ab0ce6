import filecmp

import pytest

from ommfc import cli, linearized_ocp


def _run(tmp_path, *extra, name="uav2d_single", iters="2"):
    args = ["run", "--scenario", name, "--iters", iters, "--out", str(tmp_path),
            "--threads", "1", "--no-timing", *extra]
    return cli.main(args)


def test_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["sat_constellation", "uav2d_multisource", "uav2d_single", "uav3d_obstacles"]


def test_run_writes_files(tmp_path):
    assert _run(tmp_path, "--snapshot-times", "0,0.5,1.0") == 0
    lines = (tmp_path / "history.csv").read_text().splitlines()
    assert len(lines) == 4
    assert sorted(p.name for p in tmp_path.glob("snapshot_t*.csv")) == [
        "snapshot_t0.csv", "snapshot_t150.csv", "snapshot_t75.csv"]


def test_single_iteration(tmp_path):
    assert _run(tmp_path, iters="1") == 0
    assert len((tmp_path / "history.csv").read_text().splitlines()) == 3


def test_run_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run(a, "--seed", "3") == 0
    assert _run(b, "--seed", "3") == 0
    for p in a.iterdir():
        assert filecmp.cmp(p, b / p.name, shallow=False)


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", "--scenario", "uav2d_single", "--iters", "1", "--threads", "1"]) == 0
    assert (tmp_path / "env" / "history.csv").exists()


def test_missing_scenario(tmp_path, capsys):
    assert _run(tmp_path, name="missing.json") == 1
    assert "missing.json" in capsys.readouterr().err


def test_invalid_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": {"N_t": 3}}')
    assert _run(tmp_path, name=str(bad)) == 1
    assert _run(tmp_path, iters="0") == 1
    assert _run(tmp_path, "--snapshot-times", "151") == 1


def test_unknown_flag():
    with pytest.raises(SystemExit) as e:
        cli.main(["run", "--scenario", "uav2d_single", "--bogus"])
    assert e.value.code == 1


def test_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run(blocker / "sub") == 3


def test_solver_error(tmp_path, monkeypatch):
    from ommfc import solver

    def boom(*a, **k):
        raise linearized_ocp.LMOError("diverged", iteration=0)

    monkeypatch.setattr(solver, "solve_lmo_ensemble", boom)
    assert _run(tmp_path) == 2


def test_parse_snapshot_times():
    assert cli.parse_snapshot_times("0, 0.5,1.0, 10", 150) == [0, 75, 150, 10]
    with pytest.raises(ValueError):
        cli.parse_snapshot_times("1.5", 150)


def test_verify_all(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4


def test_verify_single_suite(capsys):
    assert cli.main(["verify", "--suite", "gradients"]) == 0
    assert capsys.readouterr().out.startswith("gradients")


def test_verify_detects_sign_error(monkeypatch, capsys):
    real = linearized_ocp.lmo_gradient
    monkeypatch.setattr(linearized_ocp, "lmo_gradient", lambda *a, **k: -real(*a, **k))
    assert cli.main(["verify", "--suite", "gradients"]) == 2
    assert "FAIL" in capsys.readouterr().out
