"""Tiny arithmetic expression language for potentials and initial data.

Grammar: numbers, identifiers, ``+ - * / ^ **``, unary minus, parentheses and
the functions ``exp sin cos tan arctan atan log sqrt erf abs``. ``pi`` and
``e`` are predefined constants. Expressions are parsed with :mod:`ast` and
compiled to a numpy-vectorised callable of a single variable.

>>> f = compile_expr("0.5 + 0.5*exp(-z^2)", var="z")
>>> float(f(0.0))
1.0
"""

from __future__ import annotations

import ast
import math
import operator

import numpy as np
from scipy.special import erf

from .errors import ExpressionError

FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "arctan": np.arctan,
    "atan": np.arctan,
    "log": np.log,
    "sqrt": np.sqrt,
    "erf": erf,
    "abs": np.abs,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.USub: operator.neg, ast.UAdd: operator.pos}


def _build(node, var):
    if isinstance(node, ast.Expression):
        return _build(node.body, var)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        value = float(node.value)
        return lambda x: value
    if isinstance(node, ast.Name):
        if node.id in var:
            return lambda x: x
        if node.id in CONSTANTS:
            value = CONSTANTS[node.id]
            return lambda x: value
        raise ExpressionError(f"unknown identifier {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        left, right = _build(node.left, var), _build(node.right, var)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        op = _UNOPS[type(node.op)]
        inner = _build(node.operand, var)
        return lambda x: op(inner(x))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn = FUNCTIONS.get(node.func.id)
        if fn is None:
            raise ExpressionError(f"unknown function {node.func.id!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        inner = _build(node.args[0], var)
        return lambda x: fn(inner(x))
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def compile_expr(text: str, var="x"):
    """Compile ``text`` into ``f(x) -> ndarray``.

    ``var`` is the variable name, or a tuple of accepted aliases.
    """
    aliases = (var,) if isinstance(var, str) else tuple(var)
    try:
        # '^' is power; Python would read it as a low-precedence xor
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    fn = _build(tree, aliases)

    def evaluate(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape).copy()

    evaluate.source = text
    return evaluate
