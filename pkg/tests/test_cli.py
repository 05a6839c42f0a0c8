import json

import numpy as np
import pytest

from postfixgp.cli import main
from postfixgp.io import load_state, save_dataset

from conftest import case_dataset, target_function


@pytest.fixture
def inputs(tmp_path):
    save_dataset(case_dataset(), tmp_path / "train.csv")
    (tmp_path / "functions.csv").write_text("+,2\n-,2\n*,2\n/,2\n")
    (tmp_path / "constants.csv").write_text("1,2,3,5,7\n")
    (tmp_path / "params.json").write_text(json.dumps({"generations": 5, "population_size": 20}))
    return tmp_path


def _run(inputs, out="run", *extra):
    return main([
        "run", "--data", str(inputs / "train.csv"), "--functions", str(inputs / "functions.csv"),
        "--constants", str(inputs / "constants.csv"), "--params", str(inputs / "params.json"),
        "--out", str(inputs / out), *extra,
    ])


def test_run_writes_outputs(inputs, capsys):
    assert _run(inputs, "run", "--seed", "42", "--top", "2") == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 2 and out[0].startswith("#0 size=")
    for name in ("stats.csv", "run.log", "final.snapshot"):
        assert (inputs / "run" / name).exists()
    assert len((inputs / "run" / "stats.csv").read_text().splitlines()) == 7
    log = (inputs / "run" / "run.log").read_text()
    assert log.count("Generation ") == 6 and log.startswith("Generation 0\n    Population\n")


def test_run_seed_is_deterministic(inputs):
    _run(inputs, "a", "--seed", "42")
    _run(inputs, "b", "--seed", "42")
    assert (inputs / "a" / "stats.csv").read_bytes() == (inputs / "b" / "stats.csv").read_bytes()
    assert (inputs / "a" / "final.snapshot").read_bytes() == (inputs / "b" / "final.snapshot").read_bytes()


def test_flags_override_params(inputs):
    _run(inputs, "run", "--generations", "2", "--population-size", "10")
    state = load_state(inputs / "run" / "final.snapshot")
    assert state.generation == 2 and len(state.population) == 10


def test_run_bad_inputs(inputs, capsys):
    (inputs / "params.json").write_text('{"popsize": 3}')
    assert _run(inputs) == 1
    err = capsys.readouterr().err
    assert err.startswith("postfixgp: error:") and "popsize" in err and err.count("\n") == 1


def test_missing_data_file(inputs, capsys):
    (inputs / "train.csv").unlink()
    assert _run(inputs) == 1
    assert "train.csv" in capsys.readouterr().err


def test_resume_matches_longer_run(inputs):
    _run(inputs, "short", "--generations", "3", "--seed", "7")
    _run(inputs, "long", "--generations", "6", "--seed", "7")
    rc = main(["resume", "--snapshot", str(inputs / "short" / "final.snapshot"),
               "--generations", "6", "--out", str(inputs / "resumed")])
    assert rc == 0
    long_rows = (inputs / "long" / "stats.csv").read_text()
    assert (inputs / "resumed" / "stats.csv").read_text() == long_rows
    assert (inputs / "resumed" / "final.snapshot").read_bytes() == (inputs / "long" / "final.snapshot").read_bytes()


def test_resume_backwards_is_an_error(inputs):
    _run(inputs, "run", "--generations", "3")
    rc = main(["resume", "--snapshot", str(inputs / "run" / "final.snapshot"), "--generations", "1",
               "--out", str(inputs / "r")])
    assert rc == 1


def test_predict_one_step(inputs, capsys):
    _run(inputs)
    x = np.arange(11, 21, dtype=float)
    (inputs / "test.csv").write_text("x,y\n" + "".join(f"{a},{target_function(a)}\n" for a in x))
    capsys.readouterr()
    rc = main(["predict", "--snapshot", str(inputs / "run" / "final.snapshot"), "--test", str(inputs / "test.csv"),
               "--out", str(inputs / "pred")])
    assert rc == 0
    lines = (inputs / "pred" / "predictions.csv").read_text().splitlines()
    assert lines[0] == "x,target,prediction" and len(lines) == 11
    assert "MAE=" in capsys.readouterr().out


def test_predict_multi_step_horizon(inputs):
    _run(inputs)
    (inputs / "seed.csv").write_text("x\n1\n")
    rc = main(["predict", "--snapshot", str(inputs / "run" / "final.snapshot"), "--test", str(inputs / "seed.csv"),
               "--mode", "multi-step", "--horizon", "10", "--out", str(inputs / "pred")])
    assert rc == 0
    lines = (inputs / "pred" / "predictions.csv").read_text().splitlines()
    assert lines[0] == "x,prediction" and 1 <= len(lines) <= 11


def test_predict_variable_mismatch(inputs):
    _run(inputs)
    (inputs / "bad.csv").write_text("a,b,y\n1,2,3\n")
    rc = main(["predict", "--snapshot", str(inputs / "run" / "final.snapshot"), "--test", str(inputs / "bad.csv"),
               "--out", str(inputs / "pred")])
    assert rc == 1


def test_predict_horizon_must_be_positive(inputs):
    with pytest.raises(SystemExit):
        main(["predict", "--snapshot", "s", "--test", "t", "--mode", "multi-step", "--horizon", "0"])


def test_report(inputs, capsys):
    _run(inputs)
    assert main(["report", "--stats", str(inputs / "run" / "stats.csv"), "--out", str(inputs / "plots")]) == 0
    combined = (inputs / "plots" / "combined.dat").read_text().splitlines()
    assert combined[0].startswith("#") and len(combined) == 7
    assert all(len(line.split()) == 4 for line in combined[1:])
    best = (inputs / "plots" / "best_adjusted.dat").read_text().splitlines()
    assert all(len(line.split()) == 2 for line in best[1:])


def test_report_empty_stats(inputs):
    (inputs / "empty.csv").write_text("")
    assert main(["report", "--stats", str(inputs / "empty.csv"), "--out", str(inputs / "plots")]) == 1


def test_show(inputs, capsys):
    _run(inputs)
    capsys.readouterr()
    snap = str(inputs / "run" / "final.snapshot")
    assert main(["show", "--snapshot", snap, "--top", "0"]) == 0
    assert capsys.readouterr().out == ""
    assert main(["show", "--snapshot", snap, "--top", "99"]) == 0
    captured = capsys.readouterr()
    assert "note:" in captured.err and captured.out.count("\n") == 2
    main(["show", "--snapshot", snap, "--top", "1"])
    first = capsys.readouterr().out
    main(["show", "--snapshot", snap, "--top", "1"])
    assert capsys.readouterr().out == first
