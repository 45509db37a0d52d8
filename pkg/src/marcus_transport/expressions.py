"""Tiny arithmetic-expression evaluator for 1d coefficient strings.

Supports + - * /, unary minus, **, a fixed set of functions (sqrt, sinh,
cosh, arcsinh, sin, cos, tan, exp, log, tanh, abs), the constants pi and e,
and the variable x.  Expressions are parsed with :mod:`ast` and evaluated
against numpy, so the resulting callables are vectorized.
"""

from __future__ import annotations

import ast

import numpy as np

__all__ = ["compile_expression"]

_FUNCTIONS = {
    "sqrt": np.sqrt, "sinh": np.sinh, "cosh": np.cosh, "arcsinh": np.arcsinh,
    "asinh": np.arcsinh, "sin": np.sin, "cos": np.cos, "tan": np.tan,
    "exp": np.exp, "log": np.log, "tanh": np.tanh, "abs": np.abs,
}
_CONSTANTS = {"pi": np.pi, "e": np.e}

_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def _eval(node, x):
    if isinstance(node, ast.Expression):
        return _eval(node.body, x)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ValueError(f"literal {node.value!r} is not a number")
    if isinstance(node, ast.Name):
        if node.id == "x":
            return x
        if node.id in _CONSTANTS:
            return _CONSTANTS[node.id]
        raise ValueError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval(node.operand, x)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ValueError("only the whitelisted functions may be called")
        if len(node.args) != 1 or node.keywords:
            raise ValueError("coefficient functions take exactly one argument")
        return _FUNCTIONS[node.func.id](_eval(node.args[0], x))
    raise ValueError(f"unsupported syntax: {ast.dump(node)}")


def compile_expression(text: str):
    """Compile a coefficient expression in x into a vectorized callable."""
    tree = ast.parse(text, mode="eval")
    # Parse once up front so malformed input fails at config time.
    _eval(tree, np.zeros(1))

    def fn(x):
        return np.broadcast_to(np.asarray(_eval(tree, np.asarray(x, dtype=float)),
                                          dtype=float), np.shape(x)).copy()

    fn.expression = text
    return fn
