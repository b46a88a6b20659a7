"""Tiny arithmetic expression compiler for coefficient strings.

Expressions use variables ``x1 ... xn``, the operators ``+ - * / ^`` and a
fixed set of elementary functions.  They are parsed with :mod:`ast`, checked
against a whitelist and evaluated with numpy so they vectorize over nodes.
"""

from __future__ import annotations

import ast
import re
from typing import Callable

import numpy as np

_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "arctan": np.arctan,
}
_CONSTANTS = {"pi": np.pi, "e": np.e}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_VAR = re.compile(r"^x([1-9][0-9]*)$")


class ExpressionError(ValueError):
    pass


def compile_expression(text: str, ndim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``text`` into ``f(x)`` where ``x[j-1]`` holds coordinate ``xj``."""
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            value = float(node.value)
            return lambda x: value
        if isinstance(node, ast.Name):
            if node.id in _CONSTANTS:
                value = _CONSTANTS[node.id]
                return lambda x: value
            m = _VAR.match(node.id)
            if m is None:
                raise ExpressionError(f"unknown name {node.id!r} in {text!r}")
            j = int(m.group(1)) - 1
            if j >= ndim:
                raise ExpressionError(f"variable {node.id} exceeds ambient dimension {ndim}")
            return lambda x: x[j]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = build(node.operand)
            sign = -1.0 if isinstance(node.op, ast.USub) else 1.0
            return lambda x: sign * inner(x)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op = _BINOPS[type(node.op)]
            left, right = build(node.left), build(node.right)
            return lambda x: op(left(x), right(x))
        if (
            isinstance(node, ast.Call)
            and isinstance(node.func, ast.Name)
            and node.func.id in _FUNCTIONS
            and len(node.args) == 1
            and not node.keywords
        ):
            fn = _FUNCTIONS[node.func.id]
            arg = build(node.args[0])
            return lambda x: fn(arg(x))
        raise ExpressionError(f"unsupported construct {ast.dump(node)} in {text!r}")

    compiled = build(tree)

    def evaluate(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.broadcast_to(np.asarray(compiled(x), dtype=float), x.shape[1:])

    return evaluate
