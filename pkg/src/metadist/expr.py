"""Bound expressions for value-dependent interval endpoints.

Grammar: numeric constants, names (parent variables or named graph
constants), ``+ - * /``, unary minus, ``min(...)``, ``max(...)`` and
``sum(prefix, lo, hi)``, which adds the variables ``prefix<lo>`` through
``prefix<hi>`` (so ``sum(u, 1, l)`` is ``u1 + ... + u<l>``).

Expressions are parsed with :mod:`ast` against a whitelist and evaluated
either on concrete values or by interval arithmetic over value ranges.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Union

__all__ = ["Expr", "ExprError", "parse", "references", "evaluate", "evaluate_interval"]


class ExprError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    id: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class FamilySum:
    prefix: str
    lo: "Expr"
    hi: "Expr"


Expr = Union[Num, Name, BinOp, Neg, Call, FamilySum]

_BINOPS = {ast.Add: "+", ast.Sub: "-", ast.Mult: "*", ast.Div: "/"}


def _convert(node: ast.AST) -> Expr:
    if isinstance(node, ast.Expression):
        return _convert(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return Num(float(node.value))
    if isinstance(node, ast.Name):
        return Name(node.id)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return BinOp(_BINOPS[type(node.op)], _convert(node.left), _convert(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _convert(node.operand)
        return Neg(inner) if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        fn = node.func.id
        if fn in ("min", "max"):
            if not node.args:
                raise ExprError(f"{fn}() needs arguments")
            return Call(fn, tuple(_convert(a) for a in node.args))
        if fn == "sum":
            if len(node.args) != 3 or not isinstance(node.args[0], ast.Name):
                raise ExprError("sum() takes (prefix, lo, hi) with a bare prefix name")
            return FamilySum(node.args[0].id, _convert(node.args[1]), _convert(node.args[2]))
    raise ExprError(f"unsupported syntax: {ast.dump(node)}")


def parse(text: str) -> Expr:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExprError(f"cannot parse expression {text!r}: {exc.msg}") from None
    return _convert(tree)


def references(expr: Expr) -> tuple[set[str], set[str]]:
    """Return (plain names, family prefixes) referenced by ``expr``."""
    names: set[str] = set()
    prefixes: set[str] = set()

    def walk(e: Expr) -> None:
        if isinstance(e, Name):
            names.add(e.id)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Neg):
            walk(e.operand)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a)
        elif isinstance(e, FamilySum):
            prefixes.add(e.prefix)
            walk(e.lo)
            walk(e.hi)

    walk(expr)
    return names, prefixes


def _index(x: float, what: str) -> int:
    if not (math.isfinite(x) and float(x).is_integer()):
        raise ExprError(f"sum() {what} bound must be an integer, got {x}")
    return int(x)


def evaluate(expr: Expr, lookup: Callable[[str], float]) -> float:
    """Evaluate on concrete values. ``lookup`` raises for unknown or EXC names."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Name):
        return float(lookup(expr.id))
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, lookup)
    if isinstance(expr, BinOp):
        a = evaluate(expr.left, lookup)
        b = evaluate(expr.right, lookup)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if b == 0:
            raise ExprError("division by zero in bound expression")
        return a / b
    if isinstance(expr, Call):
        vals = [evaluate(a, lookup) for a in expr.args]
        return min(vals) if expr.func == "min" else max(vals)
    if isinstance(expr, FamilySum):
        lo = _index(evaluate(expr.lo, lookup), "lower")
        hi = _index(evaluate(expr.hi, lookup), "upper")
        return float(sum(float(lookup(f"{expr.prefix}{i}")) for i in range(lo, hi + 1)))
    raise ExprError(f"bad expression node {expr!r}")


Box = tuple[float, float]


def _mul(a: Box, b: Box) -> Box:
    prods = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]]
    prods = [0.0 if math.isnan(p) else p for p in prods]
    return (min(prods), max(prods))


def evaluate_interval(expr: Expr, lookup: Callable[[str], Box]) -> Box:
    """Bound the expression over the boxes returned by ``lookup``.

    Exact when every variable occurs once (e.g. a family sum divided by a
    constant); otherwise a conservative enclosure.
    """
    if isinstance(expr, Num):
        return (expr.value, expr.value)
    if isinstance(expr, Name):
        return lookup(expr.id)
    if isinstance(expr, Neg):
        lo, hi = evaluate_interval(expr.operand, lookup)
        return (-hi, -lo)
    if isinstance(expr, BinOp):
        a = evaluate_interval(expr.left, lookup)
        b = evaluate_interval(expr.right, lookup)
        if expr.op == "+":
            return (a[0] + b[0], a[1] + b[1])
        if expr.op == "-":
            return (a[0] - b[1], a[1] - b[0])
        if expr.op == "*":
            return _mul(a, b)
        if b[0] <= 0 <= b[1]:
            raise ExprError("divisor range contains zero in bound expression")
        return _mul(a, (1.0 / b[1], 1.0 / b[0]))
    if isinstance(expr, Call):
        boxes = [evaluate_interval(a, lookup) for a in expr.args]
        if expr.func == "min":
            return (min(b[0] for b in boxes), min(b[1] for b in boxes))
        return (max(b[0] for b in boxes), max(b[1] for b in boxes))
    if isinstance(expr, FamilySum):
        lo_box = evaluate_interval(expr.lo, lookup)
        hi_box = evaluate_interval(expr.hi, lookup)
        if lo_box[0] != lo_box[1]:
            raise ExprError("sum() lower bound must be fixed for range evaluation")
        lo = _index(lo_box[0], "lower")
        hmin = _index(math.floor(hi_box[0]), "upper")
        hmax = _index(math.floor(hi_box[1]), "upper")
        total = (0.0, 0.0)
        for i in range(lo, hmax + 1):
            t = lookup(f"{expr.prefix}{i}")
            if i > hmin:
                t = (min(0.0, t[0]), max(0.0, t[1]))
            total = (total[0] + t[0], total[1] + t[1])
        return total
    raise ExprError(f"bad expression node {expr!r}")


def evaluate_mapping(expr: Expr, env: Mapping[str, float]) -> float:
    def lookup(name: str) -> float:
        try:
            return env[name]
        except KeyError:
            raise ExprError(f"unknown name {name!r} in bound expression") from None

    return evaluate(expr, lookup)
