import json

import pytest

from multiwave.cli import main


def args(tmp_path, *extra):
    return ["--out", str(tmp_path), "--nx", "31", "--T", "2", *extra]


def test_list(capsys):
    assert main(["list"]) == 0
    assert "stable-full" in capsys.readouterr().out.split()


def test_phantom_and_forward(tmp_path):
    assert main(["phantom", "stable-full-smoke", *args(tmp_path), "--no-figures"]) == 0
    assert (tmp_path / "phantom.pgm").exists() and (tmp_path / "phantom.csv").exists()
    assert main(["forward", "stable-full-smoke", *args(tmp_path), "--binary"]) == 0
    assert (tmp_path / "trace.npz").exists() and (tmp_path / "energy.csv").exists()


def test_reconstruct_flags(tmp_path, capsys):
    rc = main(["reconstruct", "stable-full-smoke", *args(tmp_path), "--steps", "3",
               "--gamma", "0.04", "--no-cut"])
    assert rc == 0
    assert (tmp_path / "landweber_nocut_g0.0400.csv").exists()
    assert "after 3 steps" in capsys.readouterr().out


def test_reconstruct_atr(tmp_path):
    rc = main(["reconstruct", "stable-full-smoke", *args(tmp_path), "--steps", "2", "--method", "atr"])
    assert rc == 0 and (tmp_path / "atr.pgm").exists()


def test_sweep_and_set(tmp_path, capsys):
    rc = main(["sweep-gamma", "stable-full-smoke", *args(tmp_path), "--steps", "2",
               "--set", "gammas=[0.03, 0.05]", "--no-figures", "--threads", "2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "gamma 0.03" in out and "gamma 0.05" in out


def test_run_writes_manifest(tmp_path):
    assert main(["run", "stable-full-smoke", *args(tmp_path), "--steps", "2", "--no-figures",
                 "--seed", "9"]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["seed"] == 9 and man["config"]["nx"] == 31 and man["status"] == 0


def test_spectrum(tmp_path, capsys):
    rc = main(["spectrum", "stable-full-smoke", "--out", str(tmp_path), "--assemble-nx", "15",
               "--no-figures", "--set", "T=1.0"])
    assert rc == 0
    s = json.loads(capsys.readouterr().out)
    assert s["parseval_ratio"] == pytest.approx(1, abs=1e-8)


def test_gn_curve(tmp_path, capsys):
    assert main(["gn-curve", "--N", "25", "--out", str(tmp_path), "--no-figures"]) == 0
    assert "N=25" in capsys.readouterr().out
    assert main(["gn-curve", "--gamma", "-1", "--out", str(tmp_path)]) == 2


@pytest.mark.parametrize("argv,code", [
    (["run", "no-such-config"], 2),
    (["run", "stable-full-smoke", "--set", "gammas=[]"], 2),
    (["run", "stable-full-smoke", "--set", "nx"], 2),
    (["run", "/nonexistent/dir/config.json"], 4),
])
def test_error_codes(tmp_path, argv, code):
    assert main(argv + ["--out", str(tmp_path / "o")]) == code


def test_divergence_code(tmp_path):
    rc = main(["reconstruct", "stable-full-smoke", *args(tmp_path), "--gamma", "2.0", "--steps", "80"])
    assert rc == 3


def test_unwritable_out(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["phantom", "stable-full-smoke", "--out", str(blocker / "sub"), "--nx", "31"]) == 4


def test_console_script():
    import shutil
    import subprocess

    exe = shutil.which("multiwave")
    if exe is None:
        pytest.skip("console script not on PATH")
    r = subprocess.run([exe, "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "multiwave" in r.stdout
