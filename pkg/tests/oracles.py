"""Independent reference implementations used only by the tests."""

import ast
import math

import numpy as np

from postfixgp.genome import Arity, subtree_spans


def completion_points(tokens, pset):
    """Every prefix length that is exactly one expression, by brute force.

    Each prefix is replayed from scratch with an explicit placeholder stack,
    which shares no code with the single-pass depth counter under test.
    """
    points = []
    arity = [int(pset.arity_table[t]) for t in tokens]
    for length in range(1, len(tokens) + 1):
        stack = []
        ok = True
        for a in arity[:length]:
            if a == Arity.TERMINAL:
                stack.append("v")
            elif a == Arity.UNARY:
                if not stack:
                    ok = False
                    break
                stack.append(("u", stack.pop()))
            else:
                if len(stack) < 2:
                    ok = False
                    break
                right = stack.pop()
                stack.append(("b", stack.pop(), right))
        if ok and len(stack) == 1:
            points.append(length)
    return points


def oracle_valid_length(tokens, pset, max_length=None):
    limit = len(tokens) if max_length is None else max_length
    pts = [p for p in completion_points(list(tokens[:limit]), pset)]
    return max(pts) if pts else None


def depth_count_valid_length(tokens, pset):
    """Largest completion point by one plain-Python depth-count pass."""
    best = None
    depth = 0
    for i, t in enumerate(tokens):
        a = int(pset.arity_table[t])
        need = (0, 1, 2)[a]
        if depth < need:
            break
        depth += 1 if a == 0 else (0 if a == 1 else -1)
        if depth == 1:
            best = i + 1
    return best


def genome_ok_fast(g, pset, min_len, max_len):
    if len(g.tokens) != max_len or not min_len <= g.valid_length <= max_len:
        return False
    return depth_count_valid_length(g.tokens, pset) == g.valid_length


def genome_ok(g, pset, min_len, max_len):
    """Genome invariants re-derived by the brute-force oracle."""
    if len(g.tokens) != max_len:
        return False
    if not min_len <= g.valid_length <= max_len:
        return False
    return oracle_valid_length(g.tokens, pset) == g.valid_length


class _NonFinite(Exception):
    def __init__(self, value):
        self.value = value


def _unary(symbol, x):
    if symbol == "sin":
        return math.sin(x)
    if symbol == "cos":
        return math.cos(x)
    if symbol == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if symbol == "log":
        return math.log(x) if x > 0 else 0.0
    if symbol == "sqrt":
        return math.sqrt(x) if x >= 0 else 0.0
    raise ValueError(symbol)


def _binary(symbol, x, y):
    a, b = np.float64(x), np.float64(y)
    with np.errstate(all="ignore"):
        if symbol == "+":
            return float(a + b)
        if symbol == "-":
            return float(a - b)
        if symbol == "*":
            return float(a * b)
        if symbol == "/":
            return float(a / b)
    raise ValueError(symbol)


def build_tree(g, pset):
    """Nested ``(token, children)`` tree recovered from the subtree spans."""
    spans = subtree_spans(g, pset)

    def node(end):
        t = int(g.tokens[end])
        a = pset.arity_table[t]
        if a == Arity.TERMINAL:
            return (t, ())
        right_end = end - 1
        if a == Arity.UNARY:
            return (t, (node(right_end),))
        left_end = spans[right_end].start - 1
        return (t, (node(left_end), node(right_end)))

    return node(g.valid_length - 1)


def tree_eval(g, inputs, pset):
    """Recursive post-order evaluation; returns the first non-finite value met."""
    tree = build_tree(g, pset)
    n_var = pset.n_variables

    def ev(n):
        t, kids = n
        if t < n_var:
            v = float(inputs[t])
        elif t < pset.n_terminals:
            v = pset.constants[t - n_var]
        else:
            vals = [ev(k) for k in kids]
            sym = pset.label(t)
            v = _unary(sym, vals[0]) if len(vals) == 1 else _binary(sym, vals[0], vals[1])
        if not math.isfinite(v):
            raise _NonFinite(v)
        return v

    try:
        return ev(tree)
    except _NonFinite as exc:
        return exc.value


def same_float(a, b):
    """Bitwise equality, treating all NaNs as one value."""
    if math.isnan(a) and math.isnan(b):
        return True
    return np.float64(a).tobytes() == np.float64(b).tobytes()


def infix_eval(text, env):
    """Evaluate a rendered infix string with the package's protected semantics."""
    tree = ast.parse(text, mode="eval")

    def ev(n):
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant):
            return float(n.value)
        if isinstance(n, ast.Name):
            return float(env[n.id])
        if isinstance(n, ast.UnaryOp) and isinstance(n.op, ast.USub):
            return -ev(n.operand)
        if isinstance(n, ast.BinOp):
            sym = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}[type(n.op)]
            a = ev(n.left)
            if not math.isfinite(a):
                raise _NonFinite(a)
            b = ev(n.right)
            if not math.isfinite(b):
                raise _NonFinite(b)
            return _binary(sym, a, b)
        if isinstance(n, ast.Call):
            a = ev(n.args[0])
            if not math.isfinite(a):
                raise _NonFinite(a)
            return _unary(n.func.id, a)
        raise ValueError(ast.dump(n))

    try:
        v = ev(tree)
    except _NonFinite as exc:
        return exc.value
    return v


def infix_to_postfix(text):
    """Postfix symbols for a Python-syntax infix expression."""
    tree = ast.parse(text, mode="eval")
    out = []

    def walk(n):
        if isinstance(n, ast.Expression):
            walk(n.body)
        elif isinstance(n, ast.Constant):
            out.append(repr(n.value))
        elif isinstance(n, ast.Name):
            out.append(n.id)
        elif isinstance(n, ast.BinOp):
            walk(n.left)
            walk(n.right)
            out.append({ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}[type(n.op)])
        elif isinstance(n, ast.Call):
            walk(n.args[0])
            out.append(n.func.id)
        else:
            raise ValueError(ast.dump(n))

    walk(tree)
    return out
