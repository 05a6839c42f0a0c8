"""Crossover and mutation over postfix genomes.

Every operator returns fresh genomes with fitness unset. When an operator
cannot produce a child within its trial budget it returns copies of its
inputs instead of raising, so the generational loop never stalls.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from postfixgp.errors import ParameterError
from postfixgp.evaluator import semantic_distance
from postfixgp.genome import Arity, Genome, compute_valid_length, random_terminals, subtree_spans

CROSSOVER_TYPES = ("ga_like", "subtree", "semantic_subtree")
MUTATION_TYPES = ("fully_protected", "partially_protected")


@dataclass
class VariationParams:
    min_length: int
    max_length: int
    crossover_type: str = "subtree"
    mutation_type: str = "partially_protected"
    max_crossover_trials: int = 20
    max_mutation_trials: int = 10
    operator_mutate_frequency: float = 0.6
    semantic_sensitivity: float = 0.0

    def __post_init__(self):
        if not 1 <= self.min_length <= self.max_length:
            raise ParameterError(f"need 1 <= min_length <= max_length, got {self.min_length}, {self.max_length}")
        if self.crossover_type not in CROSSOVER_TYPES:
            raise ParameterError(f"crossover_type must be one of {CROSSOVER_TYPES}")
        if self.mutation_type not in MUTATION_TYPES:
            raise ParameterError(f"mutation_type must be one of {MUTATION_TYPES}")
        if self.max_crossover_trials < 1 or self.max_mutation_trials < 1:
            raise ParameterError("trial caps must be >= 1")
        if not 0.0 <= self.operator_mutate_frequency <= 1.0:
            raise ParameterError("operator_mutate_frequency must lie in [0, 1]")
        if not self.semantic_sensitivity >= 0.0:
            raise ParameterError("semantic_sensitivity must be >= 0")


def _child(tokens, pset, params) -> Optional[Genome]:
    vl = compute_valid_length(tokens, pset, params.max_length)
    if vl is None or vl < params.min_length:
        return None
    return Genome(tokens, vl)


def _copies(*parents):
    return tuple(p.copy() for p in parents)


def crossover_ga_like(p1, p2, rng, params, pset):
    """One shared cut point; the children swap full-capacity tails."""
    m = min(p1.valid_length, p2.valid_length)
    if m < 2:
        return _copies(p1, p2)
    for _ in range(params.max_crossover_trials):
        c = int(rng.integers(1, m))
        c1 = _child(np.concatenate((p1.tokens[:c], p2.tokens[c:])), pset, params)
        c2 = _child(np.concatenate((p2.tokens[:c], p1.tokens[c:])), pset, params)
        if c1 is not None and c2 is not None:
            return c1, c2
    return _copies(p1, p2)


def splice(receiver, span_r, donor, span_d, rng, pset, params):
    """Replace ``span_r`` of ``receiver`` by ``span_d`` of ``donor``; ``None`` if out of bounds."""
    new_len = receiver.valid_length - len(span_r) + len(span_d)
    if not params.min_length <= new_len <= params.max_length:
        return None
    body = np.concatenate((
        receiver.tokens[: span_r.start],
        donor.tokens[span_d.start: span_d.end + 1],
        receiver.tokens[span_r.end + 1:],
    ))
    cap = receiver.capacity
    if body.shape[0] > cap:
        body = body[:cap]
    elif body.shape[0] < cap:
        body = np.concatenate((body, random_terminals(pset, cap - body.shape[0], rng)))
    return _child(body, pset, params)


def _fits(p1, s1, p2, s2, params):
    n1 = p1.valid_length - len(s1) + len(s2)
    n2 = p2.valid_length - len(s2) + len(s1)
    lo, hi = params.min_length, params.max_length
    return lo <= n1 <= hi and lo <= n2 <= hi


def crossover_subtree(p1, p2, rng, params, pset):
    spans1 = subtree_spans(p1, pset)
    spans2 = subtree_spans(p2, pset)
    for _ in range(params.max_crossover_trials):
        s1 = spans1[int(rng.integers(len(spans1)))]
        s2 = spans2[int(rng.integers(len(spans2)))]
        if not _fits(p1, s1, p2, s2, params):
            continue
        c1 = splice(p1, s1, p2, s2, rng, pset, params)
        c2 = splice(p2, s2, p1, s1, rng, pset, params)
        if c1 is not None and c2 is not None:
            return c1, c2
    return _copies(p1, p2)


def crossover_semantic(p1, p2, dataset, rng, params, pset):
    """Subtree crossover that only swaps subtrees whose outputs differ enough.

    A span pair is accepted when it is structurally valid and its semantic
    distance exceeds ``semantic_sensitivity``. When the trial budget runs
    out, plain subtree crossover is applied instead.
    """
    if not math.isinf(params.semantic_sensitivity):
        spans1 = subtree_spans(p1, pset)
        spans2 = subtree_spans(p2, pset)
        for _ in range(params.max_crossover_trials):
            s1 = spans1[int(rng.integers(len(spans1)))]
            s2 = spans2[int(rng.integers(len(spans2)))]
            if not _fits(p1, s1, p2, s2, params):
                continue
            if not semantic_distance(p1, s1, p2, s2, dataset, pset) > params.semantic_sensitivity:
                continue
            c1 = splice(p1, s1, p2, s2, rng, pset, params)
            c2 = splice(p2, s2, p1, s1, rng, pset, params)
            if c1 is not None and c2 is not None:
                return c1, c2
    return crossover_subtree(p1, p2, rng, params, pset)


def _replacement(token, rng, params, pset):
    """A different token of the same arity class, or ``token`` when none is drawn."""
    ids = pset.ids_of(Arity(int(pset.arity_table[token])))
    for _ in range(params.max_mutation_trials):
        new = int(ids[int(rng.integers(len(ids)))])
        if new != token:
            return new
    return int(token)


def mutate_fully_protected(g, rng, params, pset):
    prefix_arity = pset.arity_table[g.prefix]
    op_pos = np.flatnonzero(prefix_arity != Arity.TERMINAL)
    term_pos = np.flatnonzero(prefix_arity == Arity.TERMINAL)
    positions = op_pos if rng.random() < params.operator_mutate_frequency else term_pos
    if positions.size == 0:
        positions = term_pos if positions is op_pos else op_pos
    i = int(positions[int(rng.integers(positions.size))])
    child = g.copy()
    child.tokens[i] = _replacement(int(g.tokens[i]), rng, params, pset)
    return child


def mutate_partially_protected(g, rng, params, pset):
    """Same-arity change below ``min_length``, unconstrained change above it."""
    for _ in range(params.max_mutation_trials):
        i = int(rng.integers(g.capacity))
        tokens = g.tokens.copy()
        if i < params.min_length:
            tokens[i] = _replacement(int(tokens[i]), rng, params, pset)
            return Genome(tokens, g.valid_length)
        tokens[i] = int(rng.integers(pset.size))
        child = _child(tokens, pset, params)
        if child is not None:
            return child
    return g.copy()


def crossover(p1, p2, dataset, rng, params, pset):
    if params.crossover_type == "ga_like":
        return crossover_ga_like(p1, p2, rng, params, pset)
    if params.crossover_type == "subtree":
        return crossover_subtree(p1, p2, rng, params, pset)
    return crossover_semantic(p1, p2, dataset, rng, params, pset)


def mutate(g, rng, params, pset):
    if params.mutation_type == "fully_protected":
        return mutate_fully_protected(g, rng, params, pset)
    return mutate_partially_protected(g, rng, params, pset)
