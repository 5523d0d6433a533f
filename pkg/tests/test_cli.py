import subprocess
import sys

import pytest

from aeroground.cli import main
from aeroground.evaluation import EvalSummary
from aeroground.io import kvfile, pgm


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(out), "-n", "3", "--seed", "4"]) == 0
    return out


def test_register_self(synth_dir, tmp_path, capsys):
    t = str(synth_dir / "template.pgm")
    code = main(["register", t, t, "--out", str(tmp_path), "--report", str(tmp_path / "r.txt")])
    assert code == 0
    assert "s=1.000000 theta_deg=0.0000 tx=0.000 ty=0.000" in capsys.readouterr().out
    assert pgm.read(tmp_path / "overlay.pgm").shape == (256, 256)
    assert float(kvfile.load(tmp_path / "r.txt")["s"]) == pytest.approx(1.0)


def test_eval_report_round_trip(synth_dir, tmp_path, capsys):
    report = tmp_path / "eval.txt"
    assert main(["eval", str(synth_dir / "manifest.csv"), "--report", str(report)]) == 0
    summary = EvalSummary.from_report(report.read_text())
    assert summary.n == 3 and summary.recovered == 1.0
    assert "acc_rot=" in capsys.readouterr().out


def test_simulate(tmp_path, capsys):
    scen = tmp_path / "scen.txt"
    scen.write_text("episodes=2\nseed=8\ntile_grid=1x1\n")
    assert main(["simulate", str(scen), "--out", str(tmp_path / "o"), "--report", str(tmp_path / "rep.txt")]) == 0
    rep = kvfile.load(tmp_path / "rep.txt")
    assert rep["episodes"] == "2" and "episode_1.improvement" in rep
    assert (tmp_path / "o" / "feasible_0001.pgm").exists()


def test_bench(capsys):
    assert main(["bench", "--repeats", "2", "--warmup", "0", "--size", "64"]) == 0
    out = kvfile.parse(capsys.readouterr().out)
    assert out["size"] == "64" and float(out["p50_ms"]) > 0


def test_config_file(synth_dir, tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("working_size=128\nfeature_mode=gradient-magnitude\n")
    t = str(synth_dir / "template.pgm")
    assert main(["register", t, t, "--config", str(cfg), "--out", str(tmp_path)]) == 0


def test_errors(tmp_path, capsys):
    assert main(["register", str(tmp_path / "nope.pgm"), str(tmp_path / "nope.pgm")]) == 1
    assert "error" in capsys.readouterr().err
    bad = tmp_path / "cfg.txt"
    bad.write_text("bogus=1\n")
    assert main(["bench", "--config", str(bad)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["register", "--frobnicate"])
    assert exc.value.code != 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aeroground", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "simulate" in proc.stdout
