"""A small arithmetic language for spatial fields.

Grammar: numbers, the variables ``x`` and ``y``, unary minus, ``+ - * /``,
parentheses and the functions ``min(a, b, ...)`` and ``max(a, b, ...)``.
Expressions are parsed with :mod:`ast` and evaluated vectorially over points.
"""
from __future__ import annotations

import ast
import operator

import numpy as np

GRAMMAR_VERSION = "1"

_BIN = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_FUN = {"min": np.minimum, "max": np.maximum}


class ExpressionError(ValueError):
    pass


def _check(node, src):
    if isinstance(node, ast.Expression):
        return _check(node.body, src)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return
    if isinstance(node, ast.Name) and node.id in ("x", "y"):
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        return _check(node.operand, src)
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
        _check(node.left, src)
        return _check(node.right, src)
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUN
            and not node.keywords and len(node.args) >= 2):
        for a in node.args:
            _check(a, src)
        return
    what = ast.get_source_segment(src, node) or type(node).__name__
    raise ExpressionError(f"unsupported construct {what!r} in {src!r}")


def _eval(node, x, y):
    if isinstance(node, ast.Constant):
        return np.full_like(x, float(node.value))
    if isinstance(node, ast.Name):
        return x if node.id == "x" else y
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, x, y)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        return _BIN[type(node.op)](_eval(node.left, x, y), _eval(node.right, x, y))
    out = _eval(node.args[0], x, y)
    for a in node.args[1:]:
        out = _FUN[node.func.id](out, _eval(a, x, y))
    return out


class Expression:
    """Compiled field f(x, y); calling it on an (n, 2) array returns (n,) values."""

    def __init__(self, source):
        if isinstance(source, (int, float)) and not isinstance(source, bool):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ExpressionError(f"expected a number or an expression string, got {type(source).__name__}")
        self.source = source
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {source!r}: {exc.msg}") from None
        _check(tree, source)
        self._tree = tree.body
        if isinstance(self._tree, ast.Constant):
            self.constant = float(self._tree.value)

    def __call__(self, points) -> np.ndarray:
        p = np.asarray(points, float).reshape(-1, 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.asarray(_eval(self._tree, p[:, 0].copy(), p[:, 1].copy()), float)

    def __repr__(self):
        return f"Expression({self.source!r})"


class VectorExpression:
    """A pair of expressions evaluated to an (n, 2) array."""

    def __init__(self, sources):
        if len(sources) != 2:
            raise ExpressionError("vector fields need exactly two components")
        self.parts = [Expression(s) for s in sources]
        self.source = [p.source for p in self.parts]

    def __call__(self, points) -> np.ndarray:
        return np.stack([p(points) for p in self.parts], axis=1)
