"""Parent selection and the elite archive."""

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from postfixgp.errors import ParameterError, StateError

SCHEMES = ("roulette", "tournament", "parsimony")


@dataclass
class SelectionConfig:
    scheme: str = "tournament"
    tournament_size: int = 2
    # relative tolerance: candidates with adj >= best * (1 - eps) tie with the best
    parsimony_epsilon: float = 1e-6
    archive_parent_rate: float = 0.2
    archive_size: Optional[int] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ParameterError(f"selection scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.tournament_size < 1:
            raise ParameterError("tournament_size must be >= 1")
        if self.parsimony_epsilon < 0:
            raise ParameterError("parsimony_epsilon must be >= 0")
        if not 0.0 <= self.archive_parent_rate <= 1.0:
            raise ParameterError("archive_parent_rate must lie in [0, 1]")
        if self.archive_size is not None and self.archive_size < 1:
            raise ParameterError("archive_size must be >= 1")

    def capacity(self, population_size):
        if self.archive_size is not None:
            return self.archive_size
        return archive_capacity(population_size)

    def to_dict(self):
        return asdict(self)


def archive_capacity(population_size):
    """Default archive size: a tenth of the population, at least one."""
    return max(1, population_size // 10)


def _fitness(pool):
    adj = np.array([g.adjusted_fitness for g in pool], dtype=object)
    if any(a is None for a in adj):
        raise StateError("selection pool contains unevaluated genomes")
    return adj.astype(np.float64)


def select(pool, cfg, rng):
    """Index of one selected member of ``pool``."""
    if not pool:
        raise ParameterError("cannot select from an empty pool")
    adj = _fitness(pool)
    if cfg.scheme == "roulette":
        total = adj.sum()
        if not total > 0:
            return int(rng.integers(len(pool)))
        u = rng.random() * total
        return min(int(np.searchsorted(np.cumsum(adj), u, side="right")), len(pool) - 1)

    drawn = rng.integers(len(pool), size=cfg.tournament_size)
    if cfg.scheme == "tournament":
        return int(min(drawn, key=lambda i: (-adj[i], i)))
    best = adj[drawn].max()
    floor = best - cfg.parsimony_epsilon * abs(best)
    close = [int(i) for i in drawn if adj[i] >= floor]
    return min(close, key=lambda i: (pool[i].valid_length, i))


def choose_pool(population, archive, cfg, rng):
    """Population or archive, decided independently for every parent draw."""
    if not population:
        raise ParameterError("population is empty")
    if archive and rng.random() < cfg.archive_parent_rate:
        return archive
    return population


def archive_order(g):
    return (-g.adjusted_fitness, g.valid_length, tuple(int(t) for t in g.prefix))


def update_archive(archive, candidates, capacity):
    """Merge, drop duplicate genotypes, sort best-first, keep ``capacity`` entries.

    Ties on adjusted fitness go to the shorter genome, then to the smaller
    token sequence, so the result does not depend on candidate order.
    """
    if capacity < 1:
        raise ParameterError("archive capacity must be >= 1")
    merged = {}
    for g in list(archive) + list(candidates):
        if g.adjusted_fitness is None:
            raise StateError("archive candidates must be evaluated")
        merged.setdefault(g.key(), g)
    ranked = sorted(merged.values(), key=archive_order)
    return ranked[:capacity]
