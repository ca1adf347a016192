"""Constant fitting for skeletons with placeholder constants.

A skeleton is split at the top into a signed sum of terms ``c_j * g_j``,
bare constants and constant-free or nonlinear terms. Constants that only
scale a term (or stand alone) are *linear* and solved by least squares.
Any remaining constants sit inside a term nonlinearly; they are searched on
a 41-point grid over [-10, 10] per constant, then refined by a compass
pattern search down to a 1e-10 step, minimising mean absolute error with
the linear constants re-solved at every probe. The grid runs on 256 evenly
spaced rows and the pattern search on 1024; the objective is flat at the
optimum, so this costs almost nothing in fit while keeping exhaustive
search affordable. The linear constants are finally solved on every row.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping

import numpy as np

from ..errors import FittingError
from .expr import Binary, Const, Expr, Unary, Var, constants, with_constants

GRID_POINTS = 41
GRID_RANGE = 10.0
PATTERN_MIN_STEP = 1e-10
SUBSAMPLE_ROWS = 256
REFINE_ROWS = 1024
LOSS_CAP = 1e3
_GRID_CHUNK = 4096


def _div(a, b):
    return a / np.where(b == 0, np.nan, b)


def _inv(a):
    return 1.0 / np.where(a == 0, np.nan, a)


def _log(a):
    return np.log(np.where(a > 0, a, np.nan))


def _sqrt(a):
    return np.sqrt(np.where(a >= 0, a, np.nan))


def _finite(a):
    return np.where(np.isfinite(a), a, np.nan)


_NAMESPACE = {
    "np": np,
    "_div": _div,
    "_inv": _inv,
    "_log": _log,
    "_sqrt": _sqrt,
    "_finite": _finite,
}
_UNARY_CODE = {
    "neg": "(-{})",
    "inv": "_inv({})",
    "sqrt": "_sqrt({})",
    "square": "np.square({})",
    "sin": "np.sin({})",
    "cos": "np.cos({})",
    "tan": "_finite(np.tan({}))",
    "arctan": "np.arctan({})",
    "exp": "_finite(np.exp({}))",
    "log": "_log({})",
}
_BINARY_CODE = {"add": "({} + {})", "sub": "({} - {})", "mul": "({} * {})", "div": "_div({}, {})"}


def _code(node: Expr, counter: list[int]) -> str:
    if isinstance(node, Const):
        idx = counter[0]
        counter[0] += 1
        return f"c[{idx}]"
    if isinstance(node, Var):
        return f"d[{node.name!r}]"
    if isinstance(node, Unary):
        return _UNARY_CODE[node.op].format(_code(node.arg, counter))
    left = _code(node.left, counter)
    return _BINARY_CODE[node.op].format(left, _code(node.right, counter))


@lru_cache(maxsize=65536)
def _compile(source: str) -> Callable:
    return eval(f"lambda d, c: {source}", _NAMESPACE)  # noqa: S307 - generated from a closed grammar


def compile_expression(expr: Expr) -> Callable:
    """Fast evaluator ``f(columns, consts)``; consts indexed in pre-order."""
    return _compile(_code(expr, [0]))


@dataclass
class _Term:
    sign: float
    const_index: int | None
    func: Callable | None  # None means the term is the bare constant


def _has_const(node: Expr) -> bool:
    return any(isinstance(n, Const) for n in node.walk())


def _decompose(node: Expr, sign: float, counter: list[int], out: list[_Term], factor: str | None = None) -> None:
    """Split ``node`` (times the constant-free ``factor``) into signed terms.

    Sums, negations and products with constant-free factors are expanded,
    so a constant that enters only as a coefficient of some term is linear.
    """

    def scaled(source: str | None) -> str | None:
        if factor is None:
            return source
        return factor if source is None else f"({source} * {factor})"

    def term(const_index: int | None, source: str | None) -> None:
        source = scaled(source)
        out.append(_Term(sign, const_index, None if source is None else _compile(source)))

    def next_index() -> int:
        counter[0] += 1
        return counter[0] - 1

    if isinstance(node, Const):
        term(next_index(), None)
    elif isinstance(node, Binary) and node.op in ("add", "sub"):
        _decompose(node.left, sign, counter, out, factor)
        _decompose(node.right, sign if node.op == "add" else -sign, counter, out, factor)
    elif isinstance(node, Unary) and node.op == "neg":
        _decompose(node.arg, -sign, counter, out, factor)
    elif isinstance(node, Binary) and node.op == "mul" and isinstance(node.left, Const):
        idx = next_index()
        term(idx, _code(node.right, counter))
    elif isinstance(node, Binary) and node.op == "mul" and isinstance(node.right, Const):
        source = _code(node.left, counter)
        term(next_index(), source)
    elif isinstance(node, Binary) and node.op == "mul" and not _has_const(node.right):
        _decompose(node.left, sign, counter, out, scaled(_code(node.right, counter)))
    elif isinstance(node, Binary) and node.op == "mul" and not _has_const(node.left):
        left = _code(node.left, counter)
        _decompose(node.right, sign, counter, out, scaled(left))
    elif isinstance(node, Binary) and node.op == "div" and isinstance(node.left, Const):
        idx = next_index()
        term(idx, f"_inv({_code(node.right, counter)})")
    elif isinstance(node, Binary) and node.op == "div" and not _has_const(node.right):
        _decompose(node.left, sign, counter, out, scaled(f"_inv({_code(node.right, counter)})"))
    else:
        term(None, _code(node, counter))


class SkeletonModel:
    """Linear/nonlinear split of one skeleton, ready for repeated evaluation."""

    def __init__(self, skeleton: Expr):
        self.skeleton = skeleton
        self.n_consts = len(constants(skeleton))
        self.terms: list[_Term] = []
        _decompose(skeleton, 1.0, [0], self.terms)
        self.linear = [t.const_index for t in self.terms if t.const_index is not None]
        linear = set(self.linear)
        self.nonlinear = [i for i in range(self.n_consts) if i not in linear]

    def _consts(self, theta: np.ndarray | None) -> list:
        c: list = [0.0] * self.n_consts
        if theta is not None:
            for j, idx in enumerate(self.nonlinear):
                c[idx] = theta[..., j : j + 1] if theta.ndim == 2 else float(theta[j])
        return c

    def design(self, data: Mapping[str, np.ndarray], theta: np.ndarray | None):
        """Return (fixed part, design columns) for the given nonlinear values."""
        c = self._consts(theta)
        n = len(next(iter(data.values())))
        fixed = np.zeros(n)
        cols = []
        for term in self.terms:
            if term.func is None:
                value = np.full(n, term.sign)
            else:
                value = term.sign * np.asarray(term.func(data, c), dtype=float)
            if term.const_index is None:
                fixed = fixed + value
            else:
                cols.append(value)
        return fixed, cols

    def objective(self, data: Mapping[str, np.ndarray], y: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """MAE per row of ``theta`` (shape (P, k)) with linear constants solved by LS."""
        P, n = theta.shape[0], len(y)
        fixed, cols = self.design(data, theta)
        fixed = np.broadcast_to(fixed, (P, n))
        if len(cols) == 1:
            x = np.broadcast_to(cols[0], (P, n))
            valid = np.isfinite(fixed) & np.isfinite(x)
            xv = np.where(valid, x, 0.0)
            rhs = np.where(valid, y - fixed, 0.0)
            a = np.einsum("pn,pn->p", xv, xv)
            b = np.einsum("pn,pn->p", xv, rhs)
            beta = np.divide(b, a, out=np.zeros_like(b), where=a > 0)
            pred = fixed + x * beta[:, None]
        elif cols:
            X = np.stack([np.broadcast_to(col, (P, n)) for col in cols], axis=-1)
            valid = np.isfinite(fixed) & np.all(np.isfinite(X), axis=-1)
            Xv = np.where(valid[..., None], X, 0.0)
            rhs = np.where(valid, y - fixed, 0.0)
            A = np.einsum("pni,pnj->pij", Xv, Xv)
            b = np.einsum("pni,pn->pi", Xv, rhs)
            beta = np.einsum("pij,pj->pi", np.linalg.pinv(A), b)
            pred = fixed + np.einsum("pni,pi->pn", X, beta)
        else:
            pred = fixed
        err = np.abs(y - pred)
        err = np.where(np.isfinite(err), np.minimum(err, LOSS_CAP), LOSS_CAP)
        return err.mean(axis=1)

    def solve_linear(self, data: Mapping[str, np.ndarray], y: np.ndarray, theta: np.ndarray | None) -> np.ndarray:
        """Full-precision least-squares linear constants for fixed ``theta``."""
        fixed, cols = self.design(data, theta)
        if not cols:
            if not np.any(np.isfinite(fixed)):
                raise FittingError("no row is inside the expression's domain")
            return np.zeros(0)
        X = np.stack(cols, axis=-1)
        valid = np.isfinite(fixed) & np.all(np.isfinite(X), axis=-1)
        if not valid.any():
            raise FittingError("no row is inside the expression's domain")
        beta, *_ = np.linalg.lstsq(X[valid], (y - fixed)[valid], rcond=None)
        return beta

    def assemble(self, beta: np.ndarray, theta: np.ndarray | None) -> Expr:
        values = [0.0] * self.n_consts
        for idx, b in zip(self.linear, beta):
            values[idx] = float(b)
        if theta is not None:
            for idx, t in zip(self.nonlinear, theta):
                values[idx] = float(t)
        return with_constants(self.skeleton, values)


def subsample(n: int, rows: int = SUBSAMPLE_ROWS) -> np.ndarray:
    if n <= rows:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, rows).round().astype(int))


def _rows(data, y, count):
    rows = subsample(len(y), count)
    return {name: np.asarray(col)[rows] for name, col in data.items()}, y[rows]


def _grid_search(model: SkeletonModel, data, y) -> np.ndarray:
    k = len(model.nonlinear)
    axis = np.linspace(-GRID_RANGE, GRID_RANGE, GRID_POINTS)
    mesh = np.stack(np.meshgrid(*([axis] * k), indexing="ij"), axis=-1).reshape(-1, k)
    best_val, best_theta = np.inf, mesh[0]
    for start in range(0, len(mesh), _GRID_CHUNK):
        chunk = mesh[start : start + _GRID_CHUNK]
        values = model.objective(data, y, chunk)
        j = int(np.argmin(values))
        if values[j] < best_val:
            best_val, best_theta = values[j], chunk[j]
    return best_theta.copy()


def _pattern_search(model: SkeletonModel, data, y, theta: np.ndarray, step: float, min_step: float) -> np.ndarray:
    """Compass search: probe +-step along each axis; double the step after an
    improving move, halve it otherwise, stop once it falls below ``min_step``."""
    k = len(theta)
    best = float(model.objective(data, y, theta[None, :])[0])
    directions = np.vstack([np.eye(k), -np.eye(k)])
    for _ in range(2000):
        if step < min_step:
            break
        probes = theta + step * directions
        values = model.objective(data, y, probes)
        j = int(np.argmin(values))
        if values[j] < best:
            theta, best = probes[j], float(values[j])
            step *= 2.0
        else:
            step *= 0.5
    return theta


def fit_constants(skeleton: Expr, data: Mapping[str, np.ndarray], target: str | np.ndarray) -> Expr:
    """Fill a skeleton's placeholder constants from data.

    ``target`` is a column name in ``data`` or the target array itself.
    """
    y = np.asarray(data[target] if isinstance(target, str) else target, dtype=float)
    model = SkeletonModel(skeleton)
    if model.n_consts == 0:
        return skeleton
    with np.errstate(all="ignore"):
        theta = None
        if model.nonlinear:
            coarse, fine = _rows(data, y, SUBSAMPLE_ROWS), _rows(data, y, REFINE_ROWS)
            theta = _grid_search(model, *coarse)
            spacing = 2 * GRID_RANGE / (GRID_POINTS - 1)
            theta = _pattern_search(model, *fine, theta, spacing / 2, PATTERN_MIN_STEP)
        beta = model.solve_linear(data, y, theta)
    return model.assemble(beta, theta)
