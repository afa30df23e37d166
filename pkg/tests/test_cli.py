import importlib

import pytest

from privcal import cli
from privcal.harness import SynthConfig, generate_synthetic, save_logits


@pytest.fixture
def logit_file(tmp_path):
    path = tmp_path / "logits.csv"
    save_logits(generate_synthetic(SynthConfig(n=3000, seed=1)), path)
    return path


def test_generate(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert cli.main(["generate", "--n", "50", "--m", "3", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "label,logit_0,logit_1,logit_2" and len(lines) == 51
    assert "wrote 50 samples" in capsys.readouterr().out


def test_calibrate_temperature(logit_file, capsys):
    rc = cli.main(["calibrate", "--input", str(logit_file), "--method", "acc_t", "--epsilon", "inf",
                   "--sources", "20", "--samples", "20"])
    assert rc == 0
    out = dict(line.split("\t") for line in capsys.readouterr().out.splitlines())
    assert 1.0 < float(out["temperature"]) < 3.0
    assert out["epsilon_spent"] == "inf"


def test_calibrate_hist_and_overdraft(logit_file, capsys):
    assert cli.main(["calibrate", "--input", str(logit_file), "--method", "hist_bin",
                     "--sources", "20", "--samples", "20"]) == 0
    assert capsys.readouterr().out.startswith("remap\t")
    assert cli.main(["calibrate", "--input", str(logit_file), "--accounting", "paper",
                     "--sources", "20", "--samples", "20"]) == 0
    assert "overdrawn" in capsys.readouterr().out


def test_sweep_to_file(logit_file, tmp_path):
    out = tmp_path / "r.csv"
    args = ["sweep", "--input", str(logit_file), "--grid", "0.5,inf", "--trials", "2",
            "--methods", "none,acc_t", "--sources", "10", "--samples", "10", "--out", str(out)]
    assert cli.main(args) == 0
    first = out.read_bytes()
    assert len(first.splitlines()) == 5
    assert cli.main(args) == 0
    assert out.read_bytes() == first


def test_bad_input_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("label,logit_0,logit_1\n0,1\n")
    assert cli.main(["calibrate", "--input", str(bad)]) == 2
    assert "bad.csv:2:" in capsys.readouterr().err


def test_bad_epsilon():
    with pytest.raises(SystemExit):
        cli.main(["calibrate", "--epsilon", "-1"])


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("PRIVCAL_SEED", "17")
    assert cli.default_seed() == 17
    args = importlib.reload(cli).build_parser().parse_args(["calibrate"])
    assert args.seed == 17
    args = cli.build_parser().parse_args(["calibrate", "--seed", "3"])
    assert args.seed == 3
    monkeypatch.delenv("PRIVCAL_SEED")
    importlib.reload(cli)


def test_verify(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 4 and all(line.startswith("PASS") for line in out)
