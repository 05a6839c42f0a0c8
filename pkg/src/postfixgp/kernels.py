"""Hot loops: depth-count validation, postfix evaluation, interval screening.

Scalar loops carry ``@njit``; with ``POSTFIXGP_DISABLE_NUMBA=1`` they run as
plain Python, and evaluation switches to a numpy path that vectorizes across
dataset rows instead.

Token tables (built by :class:`postfixgp.genome.PrimitiveSet`):

``kind[t]``
    0 variable, 1 constant, 2 binary operator, 3 unary operator.
``code[t]``
    variable column, constant slot, or operator code (see ``BINARY_CODES`` /
    ``UNARY_CODES``).
``arity[t]``
    0 terminal, 1 unary, 2 binary.

Transcendentals follow libm (``math``) on both paths so that the two
backends agree bit for bit.
"""

import math

import numpy as np

from postfixgp import _accel
from postfixgp._accel import njit

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range

KIND_VARIABLE, KIND_CONSTANT, KIND_BINARY, KIND_UNARY = 0, 1, 2, 3

ADD, SUB, MUL, DIV = 0, 1, 2, 3
SIN, COS, EXP, LOG, SQRT = 0, 1, 2, 3, 4

BINARY_CODES = {"+": ADD, "-": SUB, "*": MUL, "/": DIV}
UNARY_CODES = {"sin": SIN, "cos": COS, "exp": EXP, "log": LOG, "sqrt": SQRT}

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi
# Absolute slack on sin/cos bounds; far above libm's error on [-1, 1].
_TRIG_PAD = 1e-12


# --------------------------------------------------------------------------
# scalar primitives shared by both backends


@njit
def _apply_binary(c, x, y):
    if c == ADD:
        return x + y
    if c == SUB:
        return x - y
    if c == MUL:
        return x * y
    return x / y


@njit
def _apply_unary(c, x):
    if c == SIN:
        return math.sin(x)
    if c == COS:
        return math.cos(x)
    if c == EXP:
        if x > 709.8:
            return math.inf
        return math.exp(x)
    if c == LOG:
        if x > 0.0:
            return math.log(x)
        return 0.0
    if x < 0.0:
        return 0.0
    return math.sqrt(x)


# --------------------------------------------------------------------------
# validity


@njit
def _valid_length_loop(tokens, arity, limit):
    depth = 0
    best = -1
    n = min(tokens.shape[0], limit)
    for i in range(n):
        a = arity[tokens[i]]
        if a == 0:
            depth += 1
        elif a == 1:
            if depth < 1:
                break
        else:
            if depth < 2:
                break
            depth -= 1
        if depth == 1:
            best = i + 1
    return best


@njit
def _span_starts_loop(tokens, vlen, arity):
    """``starts[i]`` is where the subtree ending at ``i`` begins; -1 marks a malformed prefix."""
    starts = np.empty(vlen, dtype=np.int64)
    stack = np.empty(max(vlen, 1), dtype=np.int64)
    sp = 0
    for i in range(vlen):
        a = arity[tokens[i]]
        if a == 0:
            s = i
        elif a == 1:
            if sp < 1:
                starts[0] = -1
                return starts
            sp -= 1
            s = stack[sp]
        else:
            if sp < 2:
                starts[0] = -1
                return starts
            sp -= 2
            s = stack[sp]
        stack[sp] = s
        sp += 1
        starts[i] = s
    if sp != 1 and vlen > 0:
        starts[0] = -1
    return starts


# --------------------------------------------------------------------------
# evaluation


@njit
def _eval_one(tokens, vlen, kind, code, consts, X, row, stack):
    sp = 0
    for i in range(vlen):
        t = tokens[i]
        k = kind[t]
        if k == KIND_VARIABLE:
            v = X[row, code[t]]
        elif k == KIND_CONSTANT:
            v = consts[code[t]]
        elif k == KIND_BINARY:
            y = stack[sp - 1]
            x = stack[sp - 2]
            sp -= 2
            v = _apply_binary(code[t], x, y)
        else:
            sp -= 1
            v = _apply_unary(code[t], stack[sp])
        if not math.isfinite(v):
            return v
        stack[sp] = v
        sp += 1
    return stack[0]


@njit
def _eval_rows_loop(tokens, vlen, kind, code, consts, X):
    n = X.shape[0]
    out = np.empty(n)
    stack = np.empty(max(vlen, 1))
    for r in range(n):
        out[r] = _eval_one(tokens, vlen, kind, code, consts, X, r, stack)
    return out


@njit
def _eval_batch_loop(tokens2d, vlens, kind, code, consts, X):
    m = tokens2d.shape[0]
    n = X.shape[0]
    out = np.empty((m, n))
    stack = np.empty(max(tokens2d.shape[1], 1))
    for g in range(m):
        for r in range(n):
            out[g, r] = _eval_one(tokens2d[g], vlens[g], kind, code, consts, X, r, stack)
    return out


@njit(parallel=True)
def _eval_batch_parallel_loop(tokens2d, vlens, kind, code, consts, X):
    m = tokens2d.shape[0]
    n = X.shape[0]
    out = np.empty((m, n))
    for g in prange(m):
        stack = np.empty(max(tokens2d.shape[1], 1))
        for r in range(n):
            out[g, r] = _eval_one(tokens2d[g], vlens[g], kind, code, consts, X, r, stack)
    return out


def _np_exp(x):
    return np.fromiter((_apply_unary(EXP, v) for v in x.tolist()), dtype=np.float64, count=x.shape[0])


def _np_log(x):
    return np.fromiter((_apply_unary(LOG, v) for v in x.tolist()), dtype=np.float64, count=x.shape[0])


def _np_unary(c, x):
    if c == SIN:
        return np.sin(x)
    if c == COS:
        return np.cos(x)
    if c == EXP:
        # numpy's SIMD exp/log differ from libm in the last ulp
        return _np_exp(x)
    if c == LOG:
        return _np_log(x)
    return np.where(x < 0.0, 0.0, np.sqrt(x))


_NP_BINARY = (np.add, np.subtract, np.multiply, np.divide)


def eval_rows_numpy(tokens, vlen, kind, code, consts, X):
    """Row-vectorized evaluation; each row stops at its first non-finite value."""
    n = X.shape[0]
    result = np.zeros(n)
    done = np.zeros(n, dtype=bool)
    stack = []
    with np.errstate(all="ignore"):
        for i in range(vlen):
            t = tokens[i]
            k = kind[t]
            if k == KIND_VARIABLE:
                v = X[:, code[t]].astype(np.float64)
            elif k == KIND_CONSTANT:
                v = np.full(n, consts[code[t]])
            elif k == KIND_BINARY:
                y = stack.pop()
                x = stack.pop()
                v = _NP_BINARY[code[t]](x, y)
            else:
                v = _np_unary(code[t], stack.pop())
            bad = ~np.isfinite(v) & ~done
            if bad.any():
                result[bad] = v[bad]
                done |= bad
            stack.append(v)
    if not stack:
        return result
    return np.where(done, result, stack[-1])


def eval_batch_numpy(tokens2d, vlens, kind, code, consts, X):
    out = np.empty((tokens2d.shape[0], X.shape[0]))
    for g in range(tokens2d.shape[0]):
        out[g] = eval_rows_numpy(tokens2d[g], vlens[g], kind, code, consts, X)
    return out


# --------------------------------------------------------------------------
# interval screening


@njit
def _down(v, steps):
    for _ in range(steps):
        v = np.nextafter(v, -np.inf)
    return v


@njit
def _up(v, steps):
    for _ in range(steps):
        v = np.nextafter(v, np.inf)
    return v


@njit
def _sin_bounds(lo, hi):
    if hi - lo >= TWO_PI:
        return -1.0, 1.0
    a = math.sin(lo)
    b = math.sin(hi)
    out_lo = min(a, b)
    out_hi = max(a, b)
    k = math.ceil((lo - HALF_PI) / TWO_PI)
    if HALF_PI + TWO_PI * k <= hi + 1e-9:
        out_hi = 1.0
    k = math.ceil((lo + HALF_PI) / TWO_PI)
    if -HALF_PI + TWO_PI * k <= hi + 1e-9:
        out_lo = -1.0
    return max(out_lo - _TRIG_PAD, -1.0), min(out_hi + _TRIG_PAD, 1.0)


@njit
def _cos_bounds(lo, hi):
    if hi - lo >= TWO_PI:
        return -1.0, 1.0
    a = math.cos(lo)
    b = math.cos(hi)
    out_lo = min(a, b)
    out_hi = max(a, b)
    k = math.ceil(lo / TWO_PI)
    if TWO_PI * k <= hi + 1e-9:
        out_hi = 1.0
    k = math.ceil((lo - math.pi) / TWO_PI)
    if math.pi + TWO_PI * k <= hi + 1e-9:
        out_lo = -1.0
    return max(out_lo - _TRIG_PAD, -1.0), min(out_hi + _TRIG_PAD, 1.0)


@njit
def _interval_loop(tokens, vlen, kind, code, consts, box_lo, box_hi):
    los = np.empty(max(vlen, 1))
    his = np.empty(max(vlen, 1))
    sp = 0
    for i in range(vlen):
        t = tokens[i]
        k = kind[t]
        if k == KIND_VARIABLE:
            lo = box_lo[code[t]]
            hi = box_hi[code[t]]
        elif k == KIND_CONSTANT:
            lo = consts[code[t]]
            hi = lo
        elif k == KIND_BINARY:
            blo = los[sp - 1]
            bhi = his[sp - 1]
            alo = los[sp - 2]
            ahi = his[sp - 2]
            sp -= 2
            c = code[t]
            if c == ADD:
                lo = alo + blo
                hi = ahi + bhi
            elif c == SUB:
                lo = alo - bhi
                hi = ahi - blo
            elif c == MUL:
                p1 = alo * blo
                p2 = alo * bhi
                p3 = ahi * blo
                p4 = ahi * bhi
                lo = min(min(p1, p2), min(p3, p4))
                hi = max(max(p1, p2), max(p3, p4))
            else:
                if blo <= 0.0 and bhi >= 0.0:
                    return False
                q1 = alo / blo
                q2 = alo / bhi
                q3 = ahi / blo
                q4 = ahi / bhi
                lo = min(min(q1, q2), min(q3, q4))
                hi = max(max(q1, q2), max(q3, q4))
            lo = _down(lo, 1)
            hi = _up(hi, 1)
        else:
            sp -= 1
            alo = los[sp]
            ahi = his[sp]
            c = code[t]
            if c == SIN:
                lo, hi = _sin_bounds(alo, ahi)
            elif c == COS:
                lo, hi = _cos_bounds(alo, ahi)
            elif c == EXP:
                if ahi > 709.0:
                    return False
                lo = _down(math.exp(alo), 2)
                hi = _up(math.exp(ahi), 2)
                if lo < 0.0:
                    lo = 0.0
            elif c == LOG:
                if ahi <= 0.0:
                    lo = 0.0
                    hi = 0.0
                elif alo <= 0.0:
                    # log -> -inf near 0+
                    return False
                else:
                    lo = _down(math.log(alo), 2)
                    hi = _up(math.log(ahi), 2)
            else:
                if ahi < 0.0:
                    lo = 0.0
                    hi = 0.0
                else:
                    lo = 0.0 if alo <= 0.0 else _down(math.sqrt(alo), 1)
                    hi = _up(math.sqrt(ahi), 1)
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            return False
        los[sp] = lo
        his[sp] = hi
        sp += 1
    return True


# --------------------------------------------------------------------------
# public dispatch

if _accel.USE_NUMBA:
    eval_rows = _eval_rows_loop
    eval_batch = _eval_batch_loop
else:
    eval_rows = eval_rows_numpy
    eval_batch = eval_batch_numpy

valid_length = _valid_length_loop
span_starts = _span_starts_loop
interval_feasible = _interval_loop


def eval_batch_threaded(tokens2d, vlens, kind, code, consts, X, threads=1):
    """Batch evaluation; ``threads > 1`` fans genomes out over numba workers."""
    if threads > 1 and _accel.USE_NUMBA:
        return _eval_batch_parallel_loop(tokens2d, vlens, kind, code, consts, X)
    return eval_batch(tokens2d, vlens, kind, code, consts, X)
