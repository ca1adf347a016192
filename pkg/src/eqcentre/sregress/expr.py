"""Immutable expression trees, their text forms and vectorised evaluation.

Prefix (canonical) grammar::

    expr  := "(const " NUMBER ")" | "(const ?)" | "(var " NAME ")"
           | "(" UNARY " " expr ")" | "(" BINARY " " expr " " expr ")"

Numbers use 9 significant digits; ``?`` marks a constant placeholder.
Operands of ``add`` and ``mul`` are ordered by their own canonical text.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..errors import EvaluationError, FormatError

BINARY_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("neg", "inv", "sqrt", "square", "sin", "cos", "tan", "arctan", "exp", "log")
COMMUTATIVE = frozenset({"add", "mul"})

OUT_OF_DOMAIN = math.nan


class Expr:
    """Base class for expression nodes."""

    __slots__ = ()

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def walk(self) -> Iterator["Expr"]:
        """Pre-order traversal."""
        yield self

    def __str__(self) -> str:
        return infix_form(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float | None = None

    @property
    def is_placeholder(self) -> bool:
        return self.value is None


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str
    arg: Expr

    def walk(self) -> Iterator[Expr]:
        yield self
        yield from self.arg.walk()


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def walk(self) -> Iterator[Expr]:
        yield self
        yield from self.left.walk()
        yield from self.right.walk()


def constants(expr: Expr) -> list[Const]:
    """Constant leaves in pre-order."""
    return [n for n in expr.walk() if isinstance(n, Const)]


def variables(expr: Expr) -> set[str]:
    return {n.name for n in expr.walk() if isinstance(n, Var)}


def format_constant(value: float | None) -> str:
    if value is None:
        return "?"
    text = format(value, ".9g")
    return "0" if text == "-0" else text


def canonical_form(expr: Expr) -> str:
    """Prefix text; identical trees (up to add/mul operand order) match."""
    if isinstance(expr, Const):
        return f"(const {format_constant(expr.value)})"
    if isinstance(expr, Var):
        return f"(var {expr.name})"
    if isinstance(expr, Unary):
        return f"({expr.op} {canonical_form(expr.arg)})"
    left, right = canonical_form(expr.left), canonical_form(expr.right)
    if expr.op in COMMUTATIVE and right < left:
        left, right = right, left
    return f"({expr.op} {left} {right})"


_INFIX_BINARY = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def infix_form(expr: Expr) -> str:
    """Human-readable infix with explicit parentheses."""
    if isinstance(expr, Const):
        return format_constant(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        inner = infix_form(expr.arg)
        if expr.op == "neg":
            return f"(-{inner})"
        if expr.op == "inv":
            return f"(1/{inner})"
        if expr.op == "square":
            return f"({inner}^2)"
        return f"{expr.op}({inner})"
    return f"({infix_form(expr.left)} {_INFIX_BINARY[expr.op]} {infix_form(expr.right)})"


_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_prefix(text: str) -> Expr:
    """Inverse of :func:`canonical_form`."""
    tokens = _TOKEN.findall(text)
    pos = 0

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise FormatError(f"unexpected end of expression: {text!r}")
        tok = tokens[pos]
        pos += 1
        return tok

    def parse() -> Expr:
        if take() != "(":
            raise FormatError(f"expected '(' in {text!r}")
        head = take()
        if head == "const":
            raw = take()
            node: Expr = Const(None if raw == "?" else float(raw))
        elif head == "var":
            node = Var(take())
        elif head in UNARY_OPS:
            node = Unary(head, parse())
        elif head in BINARY_OPS:
            left = parse()
            node = Binary(head, left, parse())
        else:
            raise FormatError(f"unknown operator {head!r}")
        if take() != ")":
            raise FormatError(f"expected ')' in {text!r}")
        return node

    node = parse()
    if pos != len(tokens):
        raise FormatError(f"trailing tokens in {text!r}")
    return node


def with_constants(expr: Expr, values: Sequence[float]) -> Expr:
    """Replace constant leaves, in pre-order, with ``values``."""
    it = iter(values)

    def rebuild(node: Expr) -> Expr:
        if isinstance(node, Const):
            return Const(float(next(it)))
        if isinstance(node, Unary):
            return Unary(node.op, rebuild(node.arg))
        if isinstance(node, Binary):
            return Binary(node.op, rebuild(node.left), rebuild(node.right))
        return node

    return rebuild(expr)


def _apply_unary(op: str, x):
    if op == "neg":
        return -x
    if op == "inv":
        return 1.0 / x
    if op == "sqrt":
        return np.sqrt(x)
    if op == "square":
        return x * x
    if op == "sin":
        return np.sin(x)
    if op == "cos":
        return np.cos(x)
    if op == "tan":
        return np.tan(x)
    if op == "arctan":
        return np.arctan(x)
    if op == "exp":
        return np.exp(x)
    if op == "log":
        return np.log(np.where(x > 0, x, np.nan))
    raise ValueError(f"unknown unary operator {op!r}")


def _apply_binary(op: str, a, b):
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / np.where(b == 0, np.nan, b)
    raise ValueError(f"unknown binary operator {op!r}")


def evaluate(expr: Expr, columns: Mapping[str, np.ndarray], consts: Sequence | None = None):
    """Evaluate over column arrays; non-finite results become NaN.

    ``consts`` overrides constant leaves in pre-order; entries may be arrays
    shaped to broadcast against the columns (e.g. ``(P, 1)`` for a grid of
    P parameter vectors over N rows).
    """
    counter = 0

    def ev(node: Expr):
        nonlocal counter
        if isinstance(node, Const):
            idx = counter
            counter += 1
            if consts is not None:
                return consts[idx]
            if node.value is None:
                raise EvaluationError("cannot evaluate a placeholder constant")
            return node.value
        if isinstance(node, Var):
            try:
                return columns[node.name]
            except KeyError:
                raise EvaluationError(f"unbound variable {node.name!r}") from None
        if isinstance(node, Unary):
            out = _apply_unary(node.op, ev(node.arg))
        else:
            a = ev(node.left)
            out = _apply_binary(node.op, a, ev(node.right))
        out = np.asarray(out, dtype=float)
        if not np.all(np.isfinite(out)):
            out = np.where(np.isfinite(out), out, np.nan)
        return out

    with np.errstate(all="ignore"):
        return np.asarray(ev(expr), dtype=float)


def eval_expression(expr: Expr, row: Mapping[str, float]) -> float:
    """Evaluate on a single row; returns NaN (the out-of-domain marker)."""
    columns = {k: np.asarray([v], dtype=float) for k, v in row.items()}
    value = np.broadcast_to(evaluate(expr, columns), (1,))[0]
    return float(value)


def is_out_of_domain(value: float) -> bool:
    return math.isnan(value)
