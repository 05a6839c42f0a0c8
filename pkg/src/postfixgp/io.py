"""File formats: datasets, primitive files, snapshots, statistics, logs.

All writers go through :func:`atomic_write_text`, so a file is either
fully written or left untouched.
"""

import csv
import io as _io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from postfixgp.engine import GenerationRecord, GpParams, RunState
from postfixgp.errors import CorruptFileError, DataFormatError, PostfixGPError
from postfixgp.evaluator import Dataset
from postfixgp.genome import (
    BINARY_SYMBOLS,
    UNARY_SYMBOLS,
    Genome,
    PrimitiveSet,
    canonical_symbol,
    compute_valid_length,
    format_constant,
    render_log,
)
from postfixgp.selection import archive_order

SNAPSHOT_FORMAT = "postfixgp-snapshot"
SNAPSHOT_VERSION = 1

STATS_COLUMNS = (
    "generation",
    "best_adj",
    "best_size",
    "archive_mean_adj",
    "archive_mean_nodes",
    "best_so_far_expr",
    "best_so_far_size",
    "mae",
    "nmse",
    "r",
    "best_so_far_adj",
)


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_real(value):
    """Shortest round-tripping decimal for a float."""
    return repr(float(value))


def _read_rows(path):
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            return [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    except FileNotFoundError:
        raise DataFormatError(f"{path}: file not found") from None


def _parse_real(text, path, row, col):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"{path}: row {row}, column {col}: {text.strip()!r} is not a number") from None
    if not math.isfinite(value):
        raise DataFormatError(f"{path}: row {row}, column {col}: value must be finite")
    return value


def _numeric_table(path, rows, width):
    table = np.empty((len(rows), width))
    for r, row in enumerate(rows, start=2):
        if len(row) != width:
            raise DataFormatError(f"{path}: row {r} has {len(row)} columns, header has {width}")
        for c, cell in enumerate(row, start=1):
            table[r - 2, c - 1] = _parse_real(cell, path, r, c)
    return table


def load_dataset(path):
    """CSV with a header row; the last column is the target."""
    rows = _read_rows(path)
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataFormatError(f"{path}: need at least one input column and a target column")
    if len(rows) - 1 < 2:
        raise DataFormatError(f"{path}: insufficient data, need at least 2 rows, found {len(rows) - 1}")
    table = _numeric_table(path, rows[1:], len(header))
    return Dataset(tuple(header[:-1]), table[:, :-1], table[:, -1], header[-1])


def save_dataset(dataset, path):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(dataset.variable_names) + [dataset.target_name])
    for xs, y in zip(dataset.X, dataset.y):
        w.writerow([format_real(v) for v in xs] + [format_real(y)])
    atomic_write_text(path, buf.getvalue())


def load_prediction_rows(path, variable_names):
    """Test CSV for prediction: inputs, optionally followed by a target column.

    Returns ``(inputs, targets_or_None)``.
    """
    rows = _read_rows(path)
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    width = len(rows[0])
    n_vars = len(variable_names)
    if width not in (n_vars, n_vars + 1):
        raise DataFormatError(
            f"{path}: {width} column(s) but the model uses {n_vars} variable(s) (plus an optional target)"
        )
    header = [h.strip() for h in rows[0][:n_vars]]
    if header != list(variable_names):
        raise DataFormatError(f"{path}: input columns {header} do not match the model's variables {list(variable_names)}")
    table = _numeric_table(path, rows[1:], width)
    if width == n_vars + 1:
        return table[:, :n_vars], table[:, n_vars]
    return table, None


def load_functions(path):
    """``symbol,arity`` per line. Returns ``(binary_ops, unary_ops)`` in file order."""
    binary, unary = [], []
    for lineno, row in enumerate(_read_rows(path), start=1):
        if len(row) != 2:
            raise DataFormatError(f"{path}: line {lineno}: expected 'symbol,arity'")
        symbol = canonical_symbol(row[0])
        try:
            arity = int(row[1])
        except ValueError:
            raise DataFormatError(f"{path}: line {lineno}: arity {row[1].strip()!r} is not an integer") from None
        if arity not in (1, 2):
            raise DataFormatError(f"{path}: line {lineno}: arity must be 1 or 2, got {arity}")
        if symbol in BINARY_SYMBOLS:
            expected = 2
        elif symbol in UNARY_SYMBOLS:
            expected = 1
        else:
            raise DataFormatError(f"{path}: line {lineno}: unknown function symbol {symbol!r}")
        if arity != expected:
            raise DataFormatError(f"{path}: line {lineno}: {symbol!r} has arity {expected}, not {arity}")
        (binary if arity == 2 else unary).append(symbol)
    return tuple(binary), tuple(unary)


def load_constants(path):
    """Comma-separated reals; an empty file means no constants."""
    values = []
    for lineno, row in enumerate(_read_rows(path), start=1):
        for cell in row:
            if not cell.strip():
                continue
            entry = len(values) + 1
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"{path}: entry {entry}: {cell.strip()!r} is not a number") from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}: entry {entry}: value must be finite")
            values.append(v)
    return tuple(values)


def load_params(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise DataFormatError(f"{path}: file not found") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(data, dict):
        raise DataFormatError(f"{path}: expected a JSON object")
    return data


# --------------------------------------------------------------------------
# snapshots


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"


def snapshot_dict(state):
    return {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "params": state.params.to_dict(),
        "primitives": state.pset.to_dict(),
        "dataset": state.dataset.to_dict(),
        "population": [g.to_dict() for g in state.population],
        "archive": [g.to_dict() for g in state.archive],
        "rng": state.rng.bit_generator.state,
        "generation": state.generation,
        "records": [r.to_dict() for r in state.records],
    }


def save_state(state, path):
    atomic_write_text(path, _dump(snapshot_dict(state)))


def _require(data, key, where="snapshot"):
    if not isinstance(data, dict) or key not in data:
        raise CorruptFileError(f"{where}: missing field {key!r}")
    return data[key]


def _genome(data, field, params, pset):
    try:
        tokens = np.array(_require(data, "tokens", field), dtype=np.int64)
        vl = int(_require(data, "valid_length", field))
        raw = _require(data, "raw_fitness", field)
        adj = _require(data, "adjusted_fitness", field)
    except (TypeError, ValueError) as exc:
        raise CorruptFileError(f"{field}: {exc}") from None
    if tokens.shape != (params.max_length,):
        raise CorruptFileError(f"{field}: expected {params.max_length} tokens, found {tokens.size}")
    if tokens.min() < 0 or tokens.max() >= pset.size:
        raise CorruptFileError(f"{field}: token id out of range")
    if compute_valid_length(tokens, pset) != vl or not params.min_length <= vl <= params.max_length:
        raise CorruptFileError(f"{field}: valid_length {vl} does not match the tokens")
    if adj is not None:
        if raw is None or not (0.0 <= float(adj) <= 1.0) or not float(raw) >= 0.0:
            raise CorruptFileError(f"{field}: fitness values out of range")
        raw, adj = float(raw), float(adj)
    return Genome(tokens, vl, raw, adj)


def state_from_dict(data):
    if _require(data, "format") != SNAPSHOT_FORMAT:
        raise CorruptFileError(f"snapshot: unrecognised format {data.get('format')!r}")
    version = _require(data, "version")
    if version != SNAPSHOT_VERSION:
        raise CorruptFileError(f"snapshot: version {version!r} is not supported (expected {SNAPSHOT_VERSION})")
    try:
        params = GpParams.from_dict(_require(data, "params"))
    except (PostfixGPError, TypeError) as exc:
        raise CorruptFileError(f"params: {exc}") from None
    try:
        pset = PrimitiveSet.from_dict(_require(data, "primitives"))
    except (PostfixGPError, TypeError, KeyError) as exc:
        raise CorruptFileError(f"primitives: {exc}") from None
    try:
        dataset = Dataset.from_dict(_require(data, "dataset"))
    except (PostfixGPError, TypeError, KeyError, ValueError) as exc:
        raise CorruptFileError(f"dataset: {exc}") from None
    if dataset.n_variables != pset.n_variables:
        raise CorruptFileError("dataset: column count does not match the primitive set")

    population = [_genome(g, f"population[{i}]", params, pset) for i, g in enumerate(_require(data, "population"))]
    archive = [_genome(g, f"archive[{i}]", params, pset) for i, g in enumerate(_require(data, "archive"))]
    if len(population) != params.population_size:
        raise CorruptFileError(f"population: {len(population)} genomes, params say {params.population_size}")
    if not 1 <= len(archive) <= params.archive_capacity:
        raise CorruptFileError(f"archive: size {len(archive)} outside [1, {params.archive_capacity}]")
    if any(g.adjusted_fitness is None for g in population + archive):
        raise CorruptFileError("population: unevaluated genome in snapshot")
    if [archive_order(g) for g in archive] != sorted(archive_order(g) for g in archive):
        raise CorruptFileError("archive: entries are not in best-first order")

    generation = _require(data, "generation")
    if not isinstance(generation, int) or generation < 0:
        raise CorruptFileError("generation: must be a non-negative integer")
    try:
        records = [GenerationRecord(**r) for r in _require(data, "records")]
    except TypeError as exc:
        raise CorruptFileError(f"records: {exc}") from None
    if len(records) != generation + 1:
        raise CorruptFileError(f"records: {len(records)} entries for generation {generation}")

    rng = np.random.default_rng()
    try:
        rng.bit_generator.state = _require(data, "rng")
    except (TypeError, ValueError, KeyError) as exc:
        raise CorruptFileError(f"rng: {exc}") from None
    return RunState(params, pset, dataset, population, archive, generation, rng, records)


def load_state(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise DataFormatError(f"{path}: file not found") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: not a readable snapshot ({exc.msg} at line {exc.lineno})") from None
    try:
        return state_from_dict(data)
    except CorruptFileError as exc:
        raise CorruptFileError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# statistics and logs


def _cell(value):
    if isinstance(value, float):
        return format_real(value)
    return str(value)


def write_stats_csv(records, path):
    if not records:
        raise PostfixGPError("no generation records to write")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STATS_COLUMNS)
    for rec in records:
        d = rec.to_dict()
        w.writerow([_cell(d[c]) for c in STATS_COLUMNS])
    atomic_write_text(path, buf.getvalue())


def read_stats_csv(path):
    """Rows of a stats file as dicts, numbers parsed."""
    rows = _read_rows(path)
    if not rows:
        raise DataFormatError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    missing = [c for c in STATS_COLUMNS if c not in header]
    if missing:
        raise DataFormatError(f"{path}: missing column(s) {', '.join(missing)}")
    if len(rows) < 2:
        raise DataFormatError(f"{path}: no generation rows")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {lineno} has {len(row)} columns, header has {len(header)}")
        rec = dict(zip(header, row))
        for c in STATS_COLUMNS:
            if c == "best_so_far_expr":
                continue
            try:
                rec[c] = float(rec[c])
            except ValueError:
                raise DataFormatError(f"{path}: row {lineno}, column {c!r}: {rec[c]!r} is not a number") from None
        out.append(rec)
    return out


def population_log_block(state):
    lines = [f"Generation {state.generation}", "    Population"]
    lines += ["        " + render_log(g, state.pset) for g in state.population]
    lines.append("    Archive")
    lines += ["        " + render_log(g, state.pset) for g in state.archive]
    return "\n".join(lines) + "\n"


def write_population_log(state, path, blocks=None):
    """Write the log for ``state``'s generation, after any earlier ``blocks``."""
    text = "".join(blocks or ()) + population_log_block(state)
    atomic_write_text(path, text)


def write_plot_data(path, columns, series):
    lines = ["# " + " ".join(columns)]
    for values in zip(*series):
        lines.append(" ".join(_cell(float(v)) if not isinstance(v, int) else str(v) for v in values))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_predictions(path, variable_names, inputs, targets, predictions):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = list(variable_names) + (["target"] if targets is not None else []) + ["prediction"]
    w.writerow(header)
    for i, pred in enumerate(predictions):
        row = [format_real(v) for v in inputs[i]]
        if targets is not None:
            row.append(format_real(targets[i]))
        row.append(format_real(pred))
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())
