"""Linear postfix genomes.

A genome is a fixed-capacity array of token ids. Only the leading
``valid_length`` tokens form the expression; the rest is inert material that
GA-like crossover and partially protected mutation can bring back into play.

Token ids partition contiguously as variables, constants, binary operators,
unary operators, in that order.
"""

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from postfixgp import kernels
from postfixgp.errors import (
    InfeasiblePrimitiveSetError,
    InvalidGenomeError,
    InvalidTokenError,
    ParameterError,
    StateError,
)

SYMBOL_ALIASES = {"−": "-", "S": "sin"}
BINARY_SYMBOLS = tuple(kernels.BINARY_CODES)
UNARY_SYMBOLS = tuple(kernels.UNARY_CODES)


class Arity(IntEnum):
    TERMINAL = 0
    UNARY = 1
    BINARY = 2


def canonical_symbol(symbol):
    symbol = symbol.strip()
    return SYMBOL_ALIASES.get(symbol, symbol)


def format_constant(value):
    """Shortest decimal that round-trips, without a trailing ``.0``."""
    text = repr(float(value))
    if text.endswith(".0"):
        text = text[:-2]
    return text


@dataclass(frozen=True)
class PrimitiveSet:
    variables: tuple
    constants: tuple = ()
    binary_ops: tuple = ("+", "-", "*", "/")
    unary_ops: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(str(v) for v in self.variables))
        object.__setattr__(self, "constants", tuple(float(c) for c in self.constants))
        object.__setattr__(self, "binary_ops", tuple(canonical_symbol(s) for s in self.binary_ops))
        object.__setattr__(self, "unary_ops", tuple(canonical_symbol(s) for s in self.unary_ops))
        if not self.variables:
            raise ParameterError("primitive set needs at least one variable")
        if not (self.binary_ops or self.unary_ops):
            raise ParameterError("primitive set needs at least one operator")
        for c in self.constants:
            if not math.isfinite(c):
                raise ParameterError(f"constant {c!r} is not finite")
        for s in self.binary_ops:
            if s not in kernels.BINARY_CODES:
                raise ParameterError(f"unknown binary operator {s!r}")
        for s in self.unary_ops:
            if s not in kernels.UNARY_CODES:
                raise ParameterError(f"unknown unary operator {s!r}")

    @property
    def n_variables(self):
        return len(self.variables)

    @property
    def n_terminals(self):
        return len(self.variables) + len(self.constants)

    @property
    def binary_start(self):
        return self.n_terminals

    @property
    def unary_start(self):
        return self.n_terminals + len(self.binary_ops)

    @property
    def size(self):
        return self.unary_start + len(self.unary_ops)

    @cached_property
    def kind(self):
        return np.array(
            [kernels.KIND_VARIABLE] * len(self.variables)
            + [kernels.KIND_CONSTANT] * len(self.constants)
            + [kernels.KIND_BINARY] * len(self.binary_ops)
            + [kernels.KIND_UNARY] * len(self.unary_ops),
            dtype=np.int64,
        )

    @cached_property
    def code(self):
        return np.array(
            list(range(len(self.variables)))
            + list(range(len(self.constants)))
            + [kernels.BINARY_CODES[s] for s in self.binary_ops]
            + [kernels.UNARY_CODES[s] for s in self.unary_ops],
            dtype=np.int64,
        )

    @cached_property
    def arity_table(self):
        return np.array(
            [Arity.TERMINAL] * self.n_terminals
            + [Arity.BINARY] * len(self.binary_ops)
            + [Arity.UNARY] * len(self.unary_ops),
            dtype=np.int64,
        )

    @cached_property
    def const_array(self):
        return np.array(self.constants, dtype=np.float64)

    @cached_property
    def terminal_ids(self):
        return np.arange(0, self.n_terminals, dtype=np.int64)

    @cached_property
    def binary_ids(self):
        return np.arange(self.binary_start, self.unary_start, dtype=np.int64)

    @cached_property
    def unary_ids(self):
        return np.arange(self.unary_start, self.size, dtype=np.int64)

    def ids_of(self, arity_class):
        if arity_class == Arity.TERMINAL:
            return self.terminal_ids
        if arity_class == Arity.BINARY:
            return self.binary_ids
        return self.unary_ids

    def label(self, token_id):
        """Display text of one token (variable name, constant, or symbol)."""
        t = int(token_id)
        if not 0 <= t < self.size:
            raise InvalidTokenError(f"token id {t} outside [0, {self.size})")
        if t < len(self.variables):
            return self.variables[t]
        if t < self.n_terminals:
            return format_constant(self.constants[t - len(self.variables)])
        if t < self.unary_start:
            return self.binary_ops[t - self.binary_start]
        return self.unary_ops[t - self.unary_start]

    def token_id(self, symbol):
        """Inverse of :meth:`label`; numeric text is matched against constants."""
        symbol = canonical_symbol(str(symbol))
        if symbol in self.variables:
            return self.variables.index(symbol)
        if symbol in self.binary_ops:
            return self.binary_start + self.binary_ops.index(symbol)
        if symbol in self.unary_ops:
            return self.unary_start + self.unary_ops.index(symbol)
        try:
            value = float(symbol)
        except ValueError:
            raise InvalidTokenError(f"unknown symbol {symbol!r}") from None
        if value in self.constants:
            return len(self.variables) + self.constants.index(value)
        raise InvalidTokenError(f"constant {symbol!r} is not in the primitive set")

    def to_dict(self):
        return {
            "variables": list(self.variables),
            "constants": list(self.constants),
            "binary_ops": list(self.binary_ops),
            "unary_ops": list(self.unary_ops),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            variables=tuple(data["variables"]),
            constants=tuple(data.get("constants", ())),
            binary_ops=tuple(data.get("binary_ops", ())),
            unary_ops=tuple(data.get("unary_ops", ())),
        )


@dataclass(eq=False)
class Genome:
    tokens: np.ndarray
    valid_length: int
    raw_fitness: Optional[float] = None
    adjusted_fitness: Optional[float] = None

    @property
    def capacity(self):
        return self.tokens.shape[0]

    @property
    def prefix(self):
        return self.tokens[: self.valid_length]

    @property
    def size(self):
        """Node count of the expression."""
        return self.valid_length

    @property
    def evaluated(self):
        return self.adjusted_fitness is not None

    def key(self):
        """Genotype identity: the bytes of the valid prefix."""
        return self.prefix.tobytes()

    def copy(self, keep_fitness=False):
        g = Genome(self.tokens.copy(), self.valid_length)
        if keep_fitness:
            g.raw_fitness = self.raw_fitness
            g.adjusted_fitness = self.adjusted_fitness
        return g

    def to_dict(self):
        return {
            "tokens": [int(t) for t in self.tokens],
            "valid_length": int(self.valid_length),
            "raw_fitness": self.raw_fitness,
            "adjusted_fitness": self.adjusted_fitness,
        }


class SubtreeSpan(NamedTuple):
    start: int
    end: int

    def __len__(self):
        return self.end - self.start + 1


def arity(token_id, pset):
    t = int(token_id)
    if not 0 <= t < pset.size:
        raise InvalidTokenError(f"token id {t} outside [0, {pset.size})")
    return Arity(int(pset.arity_table[t]))


def _as_tokens(tokens, pset):
    arr = np.ascontiguousarray(tokens, dtype=np.int64)
    if arr.ndim != 1:
        raise InvalidTokenError("token array must be one-dimensional")
    if arr.size and (arr.min() < 0 or arr.max() >= pset.size):
        bad = int(arr[(arr < 0) | (arr >= pset.size)][0])
        raise InvalidTokenError(f"token id {bad} outside [0, {pset.size})")
    return arr


def compute_valid_length(tokens, pset, max_length=None):
    """Largest completion point of ``tokens`` (1-based), or ``None``.

    Depth counting: a terminal pushes, a unary needs depth >= 1, a binary
    needs depth >= 2 and pops one. Position ``i`` completes the expression
    when every requirement so far held and the depth is exactly 1.
    """
    arr = _as_tokens(tokens, pset)
    limit = arr.shape[0] if max_length is None else int(max_length)
    n = kernels.valid_length(arr, pset.arity_table, limit)
    return None if n < 0 else int(n)


def is_completion_point(tokens, pset, length):
    """True when ``tokens[:length]`` is exactly one complete expression."""
    depth = 0
    arity_table = pset.arity_table
    for t in tokens[:length]:
        a = arity_table[t]
        if a == Arity.TERMINAL:
            depth += 1
        elif a == Arity.UNARY:
            if depth < 1:
                return False
        else:
            if depth < 2:
                return False
            depth -= 1
    return length >= 1 and depth == 1


def feasible_lengths(pset, min_len, max_len):
    """Expression lengths in ``[min_len, max_len]`` the primitive set can build."""
    lengths = range(min_len, max_len + 1)
    if pset.unary_ops:
        return list(lengths)
    if pset.binary_ops:
        # binary-only trees always have an odd node count
        return [n for n in lengths if n % 2 == 1]
    return [n for n in lengths if n == 1]


def _completable(depth, remaining, has_unary, has_binary):
    if depth < 1 or depth - 1 > remaining:
        return False
    if not has_binary:
        return depth == 1
    if has_unary:
        return True
    return (remaining - (depth - 1)) % 2 == 0


def random_terminals(pset, count, rng):
    return rng.integers(0, pset.n_terminals, size=count).astype(np.int64)


def random_genome(pset, min_len, max_len, rng):
    """Random genome whose expression length is drawn uniformly from the feasible range.

    Tokens are built left to right, choosing uniformly among arity classes
    that keep the expression completable in the remaining slots, then
    uniformly within the class. Slots past the expression get random
    terminals.
    """
    if min_len < 1:
        raise ParameterError(f"min_len must be >= 1, got {min_len}")
    if max_len < min_len:
        raise ParameterError(f"max_len ({max_len}) < min_len ({min_len})")
    lengths = feasible_lengths(pset, min_len, max_len)
    if not lengths:
        raise InfeasiblePrimitiveSetError(
            f"no expression length in [{min_len}, {max_len}] can be built from this primitive set"
        )
    target = lengths[int(rng.integers(len(lengths)))]
    has_unary = bool(pset.unary_ops)
    has_binary = bool(pset.binary_ops)

    tokens = np.empty(max_len, dtype=np.int64)
    depth = 0
    for i in range(target):
        remaining = target - i - 1
        classes = []
        if _completable(depth + 1, remaining, has_unary, has_binary):
            classes.append(Arity.TERMINAL)
        if has_unary and depth >= 1 and _completable(depth, remaining, has_unary, has_binary):
            classes.append(Arity.UNARY)
        if has_binary and depth >= 2 and _completable(depth - 1, remaining, has_unary, has_binary):
            classes.append(Arity.BINARY)
        chosen = classes[int(rng.integers(len(classes)))]
        ids = pset.ids_of(chosen)
        tokens[i] = ids[int(rng.integers(len(ids)))]
        if chosen == Arity.TERMINAL:
            depth += 1
        elif chosen == Arity.BINARY:
            depth -= 1
    tokens[target:] = random_terminals(pset, max_len - target, rng)
    return Genome(tokens, target)


def semantic_key(outputs, tolerance):
    rounded = np.round(np.asarray(outputs, dtype=np.float64) / tolerance) + 0.0
    return rounded.tobytes()


def semantically_diverse_population(pset, size, min_len, max_len, inputs, rng,
                                    tolerance=1e-4, max_rejections=50):
    """Random genomes whose rounded output vectors on ``inputs`` are pairwise distinct.

    After ``max_rejections`` consecutive duplicates the next candidate is
    accepted regardless, so the loop always terminates.
    """
    if size < 1:
        raise ParameterError(f"population size must be >= 1, got {size}")
    X = np.ascontiguousarray(inputs, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ParameterError("semantic diversity needs a non-empty 2-D input array")
    accepted = []
    seen = set()
    rejections = 0
    while len(accepted) < size:
        g = random_genome(pset, min_len, max_len, rng)
        out = kernels.eval_rows(g.tokens, g.valid_length, pset.kind, pset.code, pset.const_array, X)
        key = semantic_key(out, tolerance)
        if key in seen and rejections < max_rejections:
            rejections += 1
            continue
        rejections = 0
        seen.add(key)
        accepted.append(g)
    return accepted


def span_starts(g, pset):
    """Start index of the subtree ending at each position of the valid prefix."""
    if g.valid_length < 1:
        raise InvalidGenomeError("genome has an empty expression")
    starts = kernels.span_starts(_as_tokens(g.tokens, pset), g.valid_length, pset.arity_table)
    if starts[0] < 0:
        raise InvalidGenomeError(f"prefix of length {g.valid_length} is not a single expression")
    return starts


def subtree_spans(g, pset):
    """One span per position of the valid prefix, ending at that position."""
    return [SubtreeSpan(int(s), i) for i, s in enumerate(span_starts(g, pset))]


def genome_from_slice(tokens, capacity, pset, rng):
    tokens = np.asarray(tokens, dtype=np.int64)
    body = np.empty(capacity, dtype=np.int64)
    body[: tokens.shape[0]] = tokens
    body[tokens.shape[0]:] = random_terminals(pset, capacity - tokens.shape[0], rng)
    return Genome(body, int(tokens.shape[0]))


def extract_subtrees(g, pset, min_len, rng):
    """Proper subtrees longer than ``min_len``, each as a standalone genome."""
    out = []
    for span in subtree_spans(g, pset):
        if len(span) > min_len and len(span) != g.valid_length:
            out.append(genome_from_slice(g.tokens[span.start: span.end + 1], g.capacity, pset, rng))
    return out


def genome_from_symbols(symbols, pset, capacity=None, rng=None):
    """Build a genome from postfix symbols such as ``["x", "1", "+"]``.

    The tail is padded with random terminals when ``rng`` is given, else with
    the first variable.
    """
    if isinstance(symbols, str):
        symbols = symbols.split()
    ids = np.array([pset.token_id(s) for s in symbols], dtype=np.int64)
    capacity = len(ids) if capacity is None else int(capacity)
    if capacity < len(ids):
        raise ParameterError(f"{len(ids)} tokens exceed capacity {capacity}")
    if not is_completion_point(ids, pset, len(ids)):
        raise InvalidGenomeError(f"{' '.join(map(str, symbols))!r} is not a complete postfix expression")
    body = np.zeros(capacity, dtype=np.int64)
    body[: len(ids)] = ids
    if rng is not None:
        body[len(ids):] = random_terminals(pset, capacity - len(ids), rng)
    return Genome(body, len(ids))


def render_infix(g, pset):
    stack = []
    arity_table = pset.arity_table
    for i in range(g.valid_length):
        t = int(g.tokens[i])
        a = arity_table[t] if 0 <= t < pset.size else -1
        if a == Arity.TERMINAL:
            stack.append(pset.label(t))
        elif a == Arity.UNARY and stack:
            stack.append(f"{pset.label(t)}({stack.pop()})")
        elif a == Arity.BINARY and len(stack) >= 2:
            y = stack.pop()
            x = stack.pop()
            stack.append(f"({x}{pset.label(t)}{y})")
        else:
            raise InvalidGenomeError(f"cannot render token {t} at position {i}")
    if len(stack) != 1:
        raise InvalidGenomeError("genome prefix is not a single expression")
    return stack[0]


def render_log(g, pset):
    """Population-log line: ``x#1#+# → AdjFit → 0.5000 → ValPos → 3``."""
    if g.adjusted_fitness is None:
        raise StateError("genome has no fitness assigned")
    body = "".join(pset.label(t) + "#" for t in g.prefix)
    return f"{body} → AdjFit → {g.adjusted_fitness:.4f} → ValPos → {g.valid_length}"
