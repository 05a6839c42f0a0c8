import json

import numpy as np
import pytest

from postfixgp.engine import GpParams, continue_run, run
from postfixgp.errors import CorruptFileError, DataFormatError
from postfixgp.io import (
    STATS_COLUMNS,
    load_constants,
    load_dataset,
    load_functions,
    load_params,
    load_prediction_rows,
    load_state,
    population_log_block,
    read_stats_csv,
    save_dataset,
    save_state,
    snapshot_dict,
    write_stats_csv,
)


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


@pytest.fixture
def small_state(case_pset, case_data):
    params = GpParams(generations=3, population_size=12, min_length=3, max_length=11, seed=1)
    return run(params, case_data, case_pset)


def test_load_dataset(tmp_path):
    ds = load_dataset(_write(tmp_path, "d.csv", "a,b,y\n1,2,3\n4,5,6\n"))
    assert ds.variable_names == ("a", "b") and ds.target_name == "y"
    assert ds.X.tolist() == [[1, 2], [4, 5]] and ds.y.tolist() == [3, 6]


def test_dataset_roundtrip(tmp_path, case_data):
    save_dataset(case_data, tmp_path / "d.csv")
    back = load_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.X, case_data.X) and np.array_equal(back.y, case_data.y)


@pytest.mark.parametrize("text, match", [
    ("", "empty"),
    ("y\n1\n2\n", "input column"),
    ("x,y\n1,2\n", "at least 2 rows"),
    ("x,y\n1,2\n3\n", "row 3"),
    ("x,y\n1,2\n3,abc\n", "column 2"),
    ("x,y\n1,2\n3,inf\n", "finite"),
])
def test_load_dataset_errors(tmp_path, text, match):
    with pytest.raises(DataFormatError, match=match):
        load_dataset(_write(tmp_path, "d.csv", text))


def test_missing_file(tmp_path):
    with pytest.raises(DataFormatError, match="not found"):
        load_dataset(tmp_path / "nope.csv")


def test_load_functions(tmp_path):
    binary, unary = load_functions(_write(tmp_path, "f.csv", "+,2\n*,2\nS,1\n−,2\n"))
    assert binary == ("+", "*", "-") and unary == ("sin",)


@pytest.mark.parametrize("text, match", [("+\n", "symbol,arity"), ("+,x\n", "integer"),
                                         ("+,3\n", "1 or 2"), ("tan,1\n", "unknown"), ("sin,2\n", "arity 1")])
def test_load_functions_errors(tmp_path, text, match):
    with pytest.raises(DataFormatError, match=match):
        load_functions(_write(tmp_path, "f.csv", text))


def test_load_constants(tmp_path):
    assert load_constants(_write(tmp_path, "c.csv", "1,2, 3.5,-0.6\n")) == (1.0, 2.0, 3.5, -0.6)
    assert load_constants(_write(tmp_path, "e.csv", "")) == ()
    with pytest.raises(DataFormatError, match="entry 2"):
        load_constants(_write(tmp_path, "b.csv", "1,x\n"))


def test_load_params(tmp_path):
    assert load_params(_write(tmp_path, "p.json", '{"seed": 3}')) == {"seed": 3}
    with pytest.raises(DataFormatError, match="invalid JSON"):
        load_params(_write(tmp_path, "q.json", "{seed"))
    with pytest.raises(DataFormatError, match="object"):
        load_params(_write(tmp_path, "r.json", "[1]"))


def test_prediction_rows(tmp_path):
    inputs, targets = load_prediction_rows(_write(tmp_path, "t.csv", "x,y\n1,2\n3,4\n"), ("x",))
    assert inputs.tolist() == [[1], [3]] and targets.tolist() == [2, 4]
    inputs, targets = load_prediction_rows(_write(tmp_path, "u.csv", "x\n1\n"), ("x",))
    assert targets is None
    with pytest.raises(DataFormatError):
        load_prediction_rows(_write(tmp_path, "v.csv", "z,y\n1,2\n"), ("x",))


def test_snapshot_roundtrip(tmp_path, small_state):
    path = tmp_path / "s.snapshot"
    save_state(small_state, path)
    back = load_state(path)
    assert snapshot_dict(back) == snapshot_dict(small_state)
    save_state(back, tmp_path / "t.snapshot")
    assert (tmp_path / "t.snapshot").read_bytes() == path.read_bytes()


def test_snapshot_resume_continues_rng(tmp_path, case_pset, case_data):
    params = GpParams(generations=6, population_size=12, min_length=3, max_length=11, seed=2)
    full = run(params, case_data, case_pset)
    part = run(GpParams(**{**params.to_dict(), "generations": 3}), case_data, case_pset)
    save_state(part, tmp_path / "s")
    resumed = continue_run(load_state(tmp_path / "s"), 6)
    assert resumed.records == full.records


@pytest.mark.parametrize("mutate, match", [
    (lambda d: d.update(format="other"), "format"),
    (lambda d: d.update(version=99), "version"),
    (lambda d: d.pop("rng"), "rng"),
    (lambda d: d["population"].pop(), "population"),
    (lambda d: d["archive"][0].update(valid_length=1), "valid_length"),
    (lambda d: d["archive"][0]["tokens"].append(0), "tokens"),
    (lambda d: d.update(generation=-1), "generation"),
    (lambda d: d["records"].pop(), "records"),
    (lambda d: d["params"].update(bogus=1), "params"),
])
def test_corrupt_snapshots(tmp_path, small_state, mutate, match):
    data = json.loads(json.dumps(snapshot_dict(small_state)))
    mutate(data)
    path = _write(tmp_path, "bad", json.dumps(data))
    with pytest.raises(CorruptFileError, match=match):
        load_state(path)


def test_truncated_snapshot(tmp_path, small_state):
    save_state(small_state, tmp_path / "s")
    text = (tmp_path / "s").read_text()
    path = _write(tmp_path, "cut", text[: len(text) // 2])
    with pytest.raises(CorruptFileError):
        load_state(path)


def test_stats_csv(tmp_path, small_state):
    path = tmp_path / "stats.csv"
    write_stats_csv(small_state.records, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(STATS_COLUMNS)
    rows = read_stats_csv(path)
    assert len(rows) == 4
    assert [r["best_so_far_adj"] for r in rows] == [r.best_so_far_adj for r in small_state.records]


def test_stats_csv_errors(tmp_path):
    with pytest.raises(DataFormatError, match="missing"):
        read_stats_csv(_write(tmp_path, "s.csv", "generation\n1\n"))


def test_population_log_block(small_state):
    text = population_log_block(small_state)
    lines = text.splitlines()
    assert lines[0] == "Generation 3" and lines[1] == "    Population"
    assert lines[2].startswith("        ") and "→ AdjFit →" in lines[2]
    assert lines[2 + 12] == "    Archive"
    assert len(lines) == 3 + 12 + len(small_state.archive)
