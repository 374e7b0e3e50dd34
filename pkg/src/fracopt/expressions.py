"""A small, safe arithmetic expression grammar for problem files.

Expressions are Python-syntax arithmetic over declared variable names,
numeric literals, the constants pi and e, and a fixed set of elementary
functions.  Anything else (attributes, comprehensions, calls to unknown
names, comparisons, ...) is rejected at compile time, so evaluating a
compiled expression can execute only arithmetic.
"""

from __future__ import annotations

import ast
import math
from typing import Callable, Dict, Sequence

from .errors import ConfigError

__all__ = ["ExpressionError", "compile_expression"]

_FUNCTIONS = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "asin": math.asin, "acos": math.acos, "atan": math.atan,
    "sinh": math.sinh, "cosh": math.cosh, "tanh": math.tanh,
    "exp": math.exp, "log": math.log, "log10": math.log10,
    "sqrt": math.sqrt, "abs": abs,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


class ExpressionError(ConfigError):
    """An operand or dynamics expression failed to compile."""


def _validate(node: ast.AST, variables: set, text: str) -> None:
    for child in ast.walk(node):
        if isinstance(child, (ast.Expression, ast.Load)):
            continue
        if isinstance(child, ast.BinOp):
            if not isinstance(child.op, _ALLOWED_BINOPS):
                raise ExpressionError(
                    f"operator {type(child.op).__name__} not allowed "
                    f"in {text!r}")
            continue
        if isinstance(child, ast.UnaryOp):
            if not isinstance(child.op, _ALLOWED_UNARY):
                raise ExpressionError(
                    f"operator {type(child.op).__name__} not allowed "
                    f"in {text!r}")
            continue
        if isinstance(child, _ALLOWED_BINOPS + _ALLOWED_UNARY):
            continue
        if isinstance(child, ast.Constant):
            if not isinstance(child.value, (int, float)):
                raise ExpressionError(
                    f"literal {child.value!r} not allowed in {text!r}")
            continue
        if isinstance(child, ast.Call):
            if not isinstance(child.func, ast.Name) \
                    or child.func.id not in _FUNCTIONS \
                    or child.keywords:
                raise ExpressionError(
                    f"only calls to {sorted(_FUNCTIONS)} are allowed "
                    f"in {text!r}")
            continue
        if isinstance(child, ast.Name):
            if child.id in _FUNCTIONS or child.id in _CONSTANTS \
                    or child.id in variables:
                continue
            raise ExpressionError(
                f"unknown name {child.id!r} in {text!r} "
                f"(declared: {sorted(variables)})")
        raise ExpressionError(
            f"syntax element {type(child).__name__} not allowed in {text!r}")


def compile_expression(text: str,
                       variables: Sequence[str]) -> Callable[[Dict[str, float]], float]:
    """Compile an arithmetic expression into env -> float.

    variables lists the names the expression may reference (e.g. "t",
    "x1", "u1"); the returned callable takes a dict supplying them.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("expression must be a non-empty string")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(
            f"cannot parse {text!r}: {exc.msg} (column {exc.offset})") from exc
    _validate(tree, set(variables), text)
    code = compile(tree, filename="<expression>", mode="eval")
    base_env = dict(_FUNCTIONS)
    base_env.update(_CONSTANTS)

    def evaluate(env: Dict[str, float]) -> float:
        scope = dict(base_env)
        scope.update(env)
        return float(eval(code, {"__builtins__": {}}, scope))

    evaluate.source = text
    return evaluate
