"""Fitness evaluation of postfix genomes.

Raw fitness is the sum of absolute errors over all fitness cases and is
``inf`` as soon as any case evaluates to a non-finite value. Adjusted fitness
maps it into ``[0, 1]`` as ``1 / (1 + raw)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from postfixgp import kernels
from postfixgp.errors import InvalidGenomeError, ParameterError
from postfixgp.genome import is_completion_point


@dataclass(frozen=True)
class Dataset:
    variable_names: tuple
    X: np.ndarray
    y: np.ndarray
    target_name: str = "y"

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        if X.ndim != 2:
            raise ParameterError("inputs must be a 2-D array")
        if y.shape != (X.shape[0],):
            raise ParameterError(f"{y.shape[0]} targets for {X.shape[0]} input rows")
        if X.shape[1] != len(self.variable_names):
            raise ParameterError(f"{X.shape[1]} input columns for {len(self.variable_names)} variable names")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ParameterError("dataset values must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_variables(self):
        return self.X.shape[1]

    def box(self):
        """Per-variable ``(lo, hi)`` arrays spanning the inputs."""
        return self.X.min(axis=0), self.X.max(axis=0)

    def to_dict(self):
        return {
            "variable_names": list(self.variable_names),
            "target_name": self.target_name,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        names = tuple(data["variable_names"])
        X = np.array(data["X"], dtype=np.float64).reshape(-1, len(names))
        return cls(names, X, np.array(data["y"], dtype=np.float64), data.get("target_name", "y"))


@dataclass(frozen=True)
class Metrics:
    """MAE, NMSE and Pearson r; ``nan`` marks an undefined value."""

    mae: float
    nmse: float
    r: float


@dataclass(frozen=True)
class FitnessReport:
    raw: float
    adjusted: float
    mae: float
    nmse: float
    r: float


def _check_genome(g, pset):
    if not is_completion_point(g.tokens, pset, g.valid_length):
        raise InvalidGenomeError("genome prefix is not a single complete expression")


def eval_genome(g, X, pset):
    """Outputs of ``g`` on every row of the 2-D input array ``X``."""
    _check_genome(g, pset)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != pset.n_variables:
        raise ParameterError(f"expected inputs with {pset.n_variables} columns")
    return kernels.eval_rows(g.tokens, g.valid_length, pset.kind, pset.code, pset.const_array, X)


def eval_postfix(g, inputs, pset):
    """Value of ``g`` at one input vector; non-finite intermediates are returned as is."""
    row = np.asarray(inputs, dtype=np.float64).reshape(1, -1)
    return float(eval_genome(g, row, pset)[0])


def raw_from_outputs(outputs, targets):
    with np.errstate(over="ignore", invalid="ignore"):
        if not np.isfinite(outputs).all():
            return math.inf
        total = float(np.abs(targets - outputs).sum())
    return total if math.isfinite(total) else math.inf


def raw_fitness(g, dataset, pset):
    if dataset.n_rows == 0:
        raise ParameterError("dataset is empty")
    return raw_from_outputs(eval_genome(g, dataset.X, pset), dataset.y)


def adjusted_fitness(raw):
    if raw < 0 or math.isnan(raw):
        raise ParameterError(f"raw fitness must be >= 0, got {raw}")
    if math.isinf(raw):
        return 0.0
    return 1.0 / (1.0 + raw)


def metrics(predictions, targets):
    pred = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if pred.shape != y.shape:
        raise ParameterError(f"{pred.shape[0]} predictions for {y.shape[0]} targets")
    if pred.size == 0:
        return Metrics(math.nan, math.nan, math.nan)
    with np.errstate(all="ignore"):
        err = y - pred
        mae = float(np.mean(np.abs(err)))
        yc = y - y.mean()
        ss_tot = float(np.dot(yc, yc))
        nmse = float(np.dot(err, err)) / ss_tot if ss_tot > 0 else math.nan
        pc = pred - pred.mean()
        ss_pred = float(np.dot(pc, pc))
        if ss_tot > 0 and ss_pred > 0 and math.isfinite(ss_pred):
            r = float(np.dot(yc, pc)) / math.sqrt(ss_tot * ss_pred)
            r = min(1.0, max(-1.0, r))
        else:
            r = math.nan
    return Metrics(mae, nmse, r)


def fitness_report(g, dataset, pset):
    out = eval_genome(g, dataset.X, pset)
    raw = raw_from_outputs(out, dataset.y)
    m = metrics(out, dataset.y)
    return FitnessReport(raw, adjusted_fitness(raw), m.mae, m.nmse, m.r)


def evaluate_population(genomes, dataset, pset, threads=1):
    """Assign raw and adjusted fitness to every genome, in place."""
    if not genomes:
        return genomes
    tokens = np.stack([g.tokens for g in genomes])
    vlens = np.array([g.valid_length for g in genomes], dtype=np.int64)
    out = kernels.eval_batch_threaded(tokens, vlens, pset.kind, pset.code, pset.const_array, dataset.X, threads)
    for g, row in zip(genomes, out):
        g.raw_fitness = raw_from_outputs(row, dataset.y)
        g.adjusted_fitness = adjusted_fitness(g.raw_fitness)
    return genomes


def span_outputs(g, span, X, pset):
    sub = np.ascontiguousarray(g.tokens[span.start: span.end + 1])
    return kernels.eval_rows(sub, sub.shape[0], pset.kind, pset.code, pset.const_array, X)


def semantic_distance(g_a, span_a, g_b, span_b, dataset, pset):
    """Mean absolute difference of two subtrees' outputs over the fitness cases.

    Rows where either output is non-finite are skipped; if more than half
    are skipped the distance is ``inf``.
    """
    X = dataset.X if isinstance(dataset, Dataset) else np.ascontiguousarray(dataset, dtype=np.float64)
    if np.array_equal(g_a.tokens[span_a.start: span_a.end + 1], g_b.tokens[span_b.start: span_b.end + 1]):
        return 0.0
    a = span_outputs(g_a, span_a, X, pset)
    b = span_outputs(g_b, span_b, X, pset)
    ok = np.isfinite(a) & np.isfinite(b)
    skipped = a.shape[0] - int(ok.sum())
    if 2 * skipped > a.shape[0] or not ok.any():
        return math.inf
    with np.errstate(over="ignore"):
        return float(np.mean(np.abs(a[ok] - b[ok])))


def interval_feasible(g, intervals, pset):
    """Static interval check that ``g`` stays finite on the input box.

    ``intervals`` is a sequence of per-variable ``(lo, hi)`` pairs, or a
    ``(lo_array, hi_array)`` tuple as returned by :meth:`Dataset.box`.
    """
    if isinstance(intervals, tuple) and len(intervals) == 2 and np.ndim(intervals[0]) == 1:
        lo, hi = intervals
    else:
        arr = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
        lo, hi = arr[:, 0], arr[:, 1]
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    if lo.shape != (pset.n_variables,) or hi.shape != lo.shape:
        raise ParameterError(f"expected {pset.n_variables} variable intervals")
    if np.any(lo > hi) or not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ParameterError("intervals must be finite with lo <= hi")
    _check_genome(g, pset)
    return bool(kernels.interval_feasible(g.tokens, g.valid_length, pset.kind, pset.code, pset.const_array, lo, hi))
