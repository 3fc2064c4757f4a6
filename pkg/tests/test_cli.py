"""The command-line client: outputs and exit codes."""

import json

import pytest

from corpus_util import CORPUS
from slic.cli import main


def path(name: str) -> str:
    return str(CORPUS / f"{name}.slic")


def test_check_prints_levels(capsys):
    assert main(["check", path("predictive")]) == 0
    out = capsys.readouterr().out
    assert "mu: model" in out
    assert "x_pred: genquant" in out


def test_check_failure_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.slic"
    bad.write_text("real x = ;")
    assert main(["check", str(bad)]) == 1
    assert capsys.readouterr().err


def test_ci_exit_codes(capsys):
    rc = main(["ci", path("cross"), "--x2", "x1", "--x3", "x4,x5",
               "--x1", "x2,x3"])
    assert rc == 0
    assert "derivable" in capsys.readouterr().out
    rc = main(["ci", path("cross"), "--x2", "x1", "--x3", "x2",
               "--x1", "x3,x4,x5"])
    assert rc == 1
    assert "not derivable" in capsys.readouterr().out


def test_usage_error_is_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["ci", path("cross")])  # missing required --x2/--x3
    assert exc.value.code == 2


def test_blanket_output(capsys):
    assert main(["blanket", path("hmm3"), "--var", "z1"]) == 0
    out = capsys.readouterr().out
    assert "y1, z2" in out


def test_transform_golden_output(tmp_path, capsys):
    out_file = tmp_path / "out.slic"
    rc = main(["transform", path("hmm3_extended"), "--order", "z1,z2,z3",
               "-o", str(out_file)])
    assert rc == 0
    from slic.parser import parse, parse_file
    from slic.syntax import programs_equivalent
    got = parse(out_file.read_text())
    want = parse_file(CORPUS / "golden" / "hmm3_extended_step3.slic")
    assert programs_equivalent(got, want)


def test_shred_prints_slices(capsys):
    assert main(["shred", path("hmm3_extended")]) == 0
    out = capsys.readouterr().out
    assert "// --- model ---" in out and "// --- genquant ---" in out


def test_eval_with_json_store(tmp_path, capsys):
    data = tmp_path / "d.json"
    data.write_text(json.dumps({"z": 2}))
    prog = tmp_path / "p.slic"
    prog.write_text("model int<2> z ~ bern(0.3);")
    assert main(["eval", str(prog), "--data", str(data), "--count"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["weight"] == pytest.approx(0.3)
    assert out["pdf_evals"] == 1


def test_preserve_files(tmp_path, capsys):
    data = tmp_path / "ys.json"
    data.write_text(json.dumps({"y1": 0.9, "y2": -0.3, "y3": 1.2}))
    rc = main(["preserve", path("hmm3"), "--against", path("hmm3_factored"),
               "--data", str(data), "--trials", "3", "--seed", "5"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"]


def test_preserve_env_seed(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SLIC_SEED", "99")
    data = tmp_path / "ys.json"
    data.write_text(json.dumps({"y1": 0.9, "y2": -0.3, "y3": 1.2}))
    rc = main(["preserve", path("hmm3"), "--against", path("hmm3"),
               "--data", str(data), "--trials", "2"])
    assert rc == 0


def test_emit_stan_output(capsys):
    assert main(["emit-stan", path("predictive")]) == 0
    assert "parameters {" in capsys.readouterr().out


def test_missing_file(capsys):
    assert main(["check", "no_such_file.slic"]) == 1
