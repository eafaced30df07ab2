from pathlib import Path

import pytest

from pica.cli import _parse_seeds, main
from pica.world import load_regions, load_world

TINY = [
    "--set", "world.n_base=6", "--set", "world.n_novel=3", "--set", "world.d_v=10", "--set", "world.d_t=6",
    "--set", "training.iterations=15", "--set", "training.batch_size=32", "--set", "sampler.M_s=16",
    "--set", "eval.n_regions=60",
]


def test_parse_seeds():
    assert _parse_seeds("0-3") == [0, 1, 2, 3]
    assert _parse_seeds("1,5,7-8") == [1, 5, 7, 8]


def test_generate(tmp_path, capsys):
    out = tmp_path / "w.txt"
    regions = tmp_path / "r.txt"
    assert main(["generate", "-o", str(out), "--seed", "4", "--regions", "7", "--regions-output", str(regions),
                 "--domain", "additive_noise", "--severity", "2"]) == 0
    assert load_world(out).n_categories == 65
    assert len(load_regions(regions)) == 7
    assert capsys.readouterr().out.startswith("# seed=4")


def test_train_evaluate_report(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["train", *TINY, "--seed", "2", "-o", str(run)]) == 0
    assert (run / "head.txt").exists() and not (run / "report.txt").exists()
    assert main(["evaluate", str(run)]) == 0
    assert (run / "report.txt").read_text().startswith("# seed=2")
    capsys.readouterr()
    assert main(["report", str(run), "--what", "log"]) == 0
    log = capsys.readouterr().out
    assert log.splitlines()[1].startswith("iteration,rho,alpha")
    assert main(["report", str(run), "--what", "delta_h", "-o", str(tmp_path / "dh.csv")]) == 0
    assert (tmp_path / "dh.csv").read_text().startswith("# seed=2")


def test_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[training]\niterations = 5\nbatch_size = 32\n[sampler]\nM_s = 16\n[run]\nseed = 9\n")
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "r"), "--evaluate",
                 "--set", "eval.n_regions=60"]) == 0
    assert "# seed=9" in capsys.readouterr().out
    cfg.write_text("[training]\niteratons = 5\n")
    assert main(["train", "-c", str(cfg), "-o", str(tmp_path / "r2")]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["train", "--set", "nonsense", "-o", str(tmp_path / "r3")]) == 2


def test_suite(tmp_path, capsys):
    out = tmp_path / "suite"
    assert main(["suite", *TINY, "--arm", "pica", "--arm", "uniform",
                 "--arm", "q512:training.queue_capacity=512", "--seeds", "0-1", "-o", str(out)]) == 0
    text = (out / "suite.txt").read_text()
    assert "q512" in text and "paired wins vs pica" in text
    assert (out / "suite.csv").read_text().count("\n") == 2 + 6
