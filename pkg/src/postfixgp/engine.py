"""The generational loop.

One generation: breed a full new population from parents drawn out of the
population or the archive, evaluate it, treat the proper subtrees of the
generation's best individual as extra candidates, fold everything into the
archive, and emit a :class:`GenerationRecord`.
"""

import math
from dataclasses import dataclass, field, fields, asdict
from typing import Callable, List, NamedTuple, Optional

import numpy as np

from postfixgp.errors import ParameterError
from postfixgp.evaluator import evaluate_population, interval_feasible, fitness_report, eval_genome
from postfixgp.genome import (
    Genome,
    extract_subtrees,
    random_genome,
    render_infix,
    semantically_diverse_population,
)
from postfixgp.selection import SelectionConfig, choose_pool, select, update_archive
from postfixgp.variation import CROSSOVER_TYPES, MUTATION_TYPES, VariationParams, crossover, mutate

INITIAL_POPULATION_TYPES = ("random", "semantically_diverse")


@dataclass
class GpParams:
    generations: int = 200
    population_size: int = 50
    min_length: int = 15
    max_length: int = 35
    mutation_rate: float = 0.1
    crossover_rate: float = 0.9
    crossover_type: str = "subtree"
    mutation_type: str = "partially_protected"
    initial_population_type: str = "semantically_diverse"
    # None disables cascading
    generations_per_cascade: Optional[int] = None
    interval_arithmetic: bool = False
    semantic_sensitivity: float = 0.0
    max_crossover_trials: int = 20
    max_mutation_trials: int = 10
    operator_mutate_frequency: float = 0.6
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.selection, dict):
            self.selection = SelectionConfig(**self.selection)
        if self.generations < 0:
            raise ParameterError("generations must be >= 0")
        if self.population_size < 2:
            raise ParameterError("population_size must be >= 2")
        if not 0 < self.min_length <= self.max_length:
            raise ParameterError(f"need 0 < min_length <= max_length, got {self.min_length}, {self.max_length}")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1]")
        if self.crossover_type not in CROSSOVER_TYPES:
            raise ParameterError(f"crossover_type must be one of {CROSSOVER_TYPES}")
        if self.mutation_type not in MUTATION_TYPES:
            raise ParameterError(f"mutation_type must be one of {MUTATION_TYPES}")
        if self.initial_population_type not in INITIAL_POPULATION_TYPES:
            raise ParameterError(f"initial_population_type must be one of {INITIAL_POPULATION_TYPES}")
        gpc = self.generations_per_cascade
        if gpc is not None and not 1 <= gpc <= max(self.generations, 1):
            raise ParameterError("generations_per_cascade must lie in [1, generations]")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        self.variation_params()

    def variation_params(self):
        return VariationParams(
            min_length=self.min_length,
            max_length=self.max_length,
            crossover_type=self.crossover_type,
            mutation_type=self.mutation_type,
            max_crossover_trials=self.max_crossover_trials,
            max_mutation_trials=self.max_mutation_trials,
            operator_mutate_frequency=self.operator_mutate_frequency,
            semantic_sensitivity=self.semantic_sensitivity,
        )

    @property
    def archive_capacity(self):
        return self.selection.capacity(self.population_size)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        data = dict(data)
        if isinstance(data.get("selection"), dict):
            sel_known = {f.name for f in fields(SelectionConfig)}
            bad = set(data["selection"]) - sel_known
            if bad:
                raise ParameterError(f"unknown selection parameter(s): {', '.join(sorted(bad))}")
        return cls(**data)


@dataclass
class GenerationRecord:
    generation: int
    best_adj: float
    best_size: int
    archive_mean_adj: float
    archive_mean_nodes: float
    best_so_far_expr: str
    best_so_far_size: int
    mae: float
    nmse: float
    r: float
    best_so_far_adj: float

    def to_dict(self):
        return asdict(self)


@dataclass
class RunState:
    params: GpParams
    pset: object
    dataset: object
    population: List[Genome]
    archive: List[Genome]
    generation: int
    rng: np.random.Generator
    records: List[GenerationRecord] = field(default_factory=list)
    threads: int = 1

    @property
    def best(self):
        """Best solution found so far (head of the archive)."""
        return self.archive[0]


class MultiStepPrediction(NamedTuple):
    values: np.ndarray
    truncated: bool


def best_index(population):
    """Index of the highest adjusted fitness; the lowest index wins ties."""
    best = 0
    for i, g in enumerate(population):
        if g.adjusted_fitness > population[best].adjusted_fitness:
            best = i
    return best


def initial_population(params, dataset, pset, rng):
    if params.initial_population_type == "semantically_diverse":
        return semantically_diverse_population(
            pset, params.population_size, params.min_length, params.max_length, dataset.X, rng
        )
    return [random_genome(pset, params.min_length, params.max_length, rng) for _ in range(params.population_size)]


def make_record(state, generation_best):
    arch = state.archive
    top = arch[0]
    rep = fitness_report(top, state.dataset, state.pset)
    return GenerationRecord(
        generation=state.generation,
        best_adj=float(generation_best.adjusted_fitness),
        best_size=int(generation_best.valid_length),
        archive_mean_adj=float(np.mean([g.adjusted_fitness for g in arch])),
        archive_mean_nodes=float(np.mean([g.valid_length for g in arch])),
        best_so_far_expr=render_infix(top, state.pset),
        best_so_far_size=int(top.valid_length),
        mae=rep.mae,
        nmse=rep.nmse,
        r=rep.r,
        best_so_far_adj=float(top.adjusted_fitness),
    )


def _check_inputs(params, dataset, pset):
    if dataset.n_rows == 0:
        raise ParameterError("dataset is empty")
    if dataset.n_variables != pset.n_variables:
        raise ParameterError(
            f"dataset has {dataset.n_variables} input column(s), primitive set declares {pset.n_variables} variable(s)"
        )


def init_run(params, dataset, pset, threads=1):
    _check_inputs(params, dataset, pset)
    rng = np.random.default_rng(params.seed)
    population = initial_population(params, dataset, pset, rng)
    evaluate_population(population, dataset, pset, threads)
    archive = update_archive([], population, params.archive_capacity)
    state = RunState(params, pset, dataset, population, archive, 0, rng, threads=threads)
    state.records.append(make_record(state, population[best_index(population)]))
    return state


def _pick_parent(state):
    pool = choose_pool(state.population, state.archive, state.params.selection, state.rng)
    return pool[select(pool, state.params.selection, state.rng)]


def breed(state):
    """A new, unevaluated population of ``population_size`` genomes."""
    params = state.params
    vparams = params.variation_params()
    rng = state.rng
    pset = state.pset
    box = state.dataset.box() if params.interval_arithmetic else None
    out = []
    while len(out) < params.population_size:
        if rng.random() < params.crossover_rate:
            a = _pick_parent(state)
            b = _pick_parent(state)
            children = zip(crossover(a, b, state.dataset, rng, vparams, pset), (a, b))
        else:
            a = _pick_parent(state)
            children = [(a.copy(), a)]
        for child, parent in children:
            if len(out) == params.population_size:
                break
            if rng.random() < params.mutation_rate:
                child = mutate(child, rng, vparams, pset)
            if box is not None and not interval_feasible(child, box, pset):
                child = parent.copy()
            out.append(child)
    return out


def step_generation(state):
    params = state.params
    population = breed(state)
    evaluate_population(population, state.dataset, state.pset, state.threads)
    best = population[best_index(population)]
    subtrees = extract_subtrees(best, state.pset, params.min_length, state.rng)
    evaluate_population(subtrees, state.dataset, state.pset, state.threads)
    state.population = population
    state.archive = update_archive(state.archive, population + subtrees, params.archive_capacity)
    state.generation += 1
    state.records.append(make_record(state, best))
    return state


def cascade_boundary(state):
    """Restart the population from scratch, keeping the archive and reinjecting it."""
    params = state.params
    fresh = initial_population(params, state.dataset, state.pset, state.rng)
    k = min(len(state.archive), len(fresh))
    fresh[:k] = [g.copy(keep_fitness=True) for g in state.archive[:k]]
    evaluate_population(fresh, state.dataset, state.pset, state.threads)
    state.population = fresh
    return state


def at_cascade_boundary(state):
    gpc = state.params.generations_per_cascade
    return gpc is not None and state.generation > 0 and state.generation % gpc == 0


def continue_run(state, generations=None, callback: Optional[Callable] = None):
    """Advance ``state`` until it reaches ``generations`` (default: the params value).

    The cascade check runs right before stepping past a boundary, so a run
    stopped exactly on a boundary and resumed later behaves like one that
    never stopped.
    """
    target = state.params.generations if generations is None else int(generations)
    if target > state.params.generations:
        state.params.generations = target
    while state.generation < target:
        if at_cascade_boundary(state):
            cascade_boundary(state)
        step_generation(state)
        if callback is not None:
            callback(state)
    return state


def run(params, dataset, pset, callback=None, threads=1):
    state = init_run(params, dataset, pset, threads)
    if callback is not None:
        callback(state)
    return continue_run(state, callback=callback)


def predict_one_step(g, test_rows, pset):
    rows = np.asarray(test_rows, dtype=np.float64)
    if rows.size == 0:
        return np.empty(0)
    return eval_genome(g, rows.reshape(-1, pset.n_variables), pset)


def predict_multi_step(g, seed_window, horizon, pset):
    """Autoregressive forecast where variable ``j`` holds lag ``j + 1``.

    Each prediction is pushed in as lag 1 and the oldest lag is dropped.
    Stops early at the first non-finite prediction.
    """
    if horizon < 1:
        raise ParameterError("horizon must be >= 1")
    window = np.asarray(seed_window, dtype=np.float64).copy()
    if window.shape != (pset.n_variables,):
        raise ParameterError(f"seed window must hold {pset.n_variables} value(s)")
    out = []
    for _ in range(horizon):
        y = float(eval_genome(g, window.reshape(1, -1), pset)[0])
        if not math.isfinite(y):
            return MultiStepPrediction(np.array(out), True)
        out.append(y)
        window = np.concatenate(([y], window[:-1]))
    return MultiStepPrediction(np.array(out), False)
