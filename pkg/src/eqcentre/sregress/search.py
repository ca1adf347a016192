"""End-to-end discovery: enumerate, fit, simplify, score, reduce to a frontier."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigurationError, FittingError, SearchError
from .config import SearchConfig
from .enumerate import enumerate_skeletons
from .expr import Binary, Const, Expr, Unary, Var, constants, evaluate, format_constant
from .fitting import LOSS_CAP, compile_expression, fit_constants
from .measures import fit_bits, parsimony_measure
from .pareto import ScoredCandidate, non_dominated, pareto_front

CHUNK_SIZE = 2048
CONSTANT_TOLERANCE = 1e-12


def augment_harmonics(dataset: Mapping[str, np.ndarray], column: str, K: int) -> dict[str, np.ndarray]:
    """Return a copy of ``dataset`` with ``sin_1 .. sin_K`` = sin(k * column)."""
    if column not in dataset:
        raise ConfigurationError(f"dataset lacks column {column!r}")
    if K < 1:
        raise ConfigurationError("harmonic count must be at least 1")
    out = {name: np.asarray(values) for name, values in dataset.items()}
    base = np.asarray(dataset[column], dtype=float)
    for k in range(1, K + 1):
        out[f"sin_{k}"] = np.sin(k * base)
    return out


def prepare_dataset(dataset: Mapping[str, np.ndarray], cfg: SearchConfig) -> dict[str, np.ndarray]:
    """Add harmonic columns when the config asks for them, then check columns."""
    data = dict(dataset)
    if cfg.harmonics and not all(f"sin_{k}" in data for k in range(1, cfg.harmonics + 1)):
        data = augment_harmonics(data, cfg.harmonic_source, cfg.harmonics)
    cfg.check_columns(data)
    if len(np.asarray(data[cfg.target])) == 0:
        raise SearchError("dataset is empty")
    return data


def _round_const(value: float) -> float:
    return float(format_constant(value))


def simplify(expr: Expr) -> Expr:
    """Light post-fit cleanup.

    Constants are rounded to the nine significant digits used in serialised
    form, so a candidate scores exactly as it is written. Multiplication by
    one and addition of zero are dropped.
    """
    if isinstance(expr, Const):
        return Const(_round_const(expr.value))
    if isinstance(expr, Var):
        return expr
    if isinstance(expr, Unary):
        return Unary(expr.op, simplify(expr.arg))
    left, right = simplify(expr.left), simplify(expr.right)
    if expr.op == "mul":
        if isinstance(left, Const) and left.value == 1.0:
            return right
        if isinstance(right, Const) and right.value == 1.0:
            return left
    if expr.op in ("add", "sub") and isinstance(right, Const) and right.value == 0.0:
        return left
    if expr.op == "add" and isinstance(left, Const) and left.value == 0.0:
        return right
    return Binary(expr.op, left, right)


def _constant_values(values: np.ndarray) -> bool:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return True
    spread = float(finite.max() - finite.min())
    return spread <= CONSTANT_TOLERANCE * max(1.0, float(np.abs(finite).max()))


def is_constant_valued(expr: Expr, data: Mapping[str, np.ndarray]) -> bool:
    """True when the expression takes a single value over the in-domain rows."""
    if not any(isinstance(node, Var) for node in expr.walk()):
        return True
    return _constant_values(np.atleast_1d(evaluate(expr, data)))


def score_skeleton(
    skeleton: Expr, data: Mapping[str, np.ndarray], cfg: SearchConfig, frame_tag: str | None = None
) -> ScoredCandidate | None:
    """Fit, simplify and score one skeleton; ``None`` if it is discarded."""
    inputs = {name: data[name] for name in cfg.inputs}
    y = np.asarray(data[cfg.target], dtype=float)
    try:
        fitted = fit_constants(skeleton, inputs, y)
    except FittingError:
        return None
    expr = simplify(fitted)
    if not any(isinstance(node, Var) for node in expr.walk()):
        return None
    with np.errstate(all="ignore"):
        pred = np.broadcast_to(np.asarray(compile_expression(expr)(inputs, [n.value for n in constants(expr)]), dtype=float), y.shape)
    pred = np.where(np.isfinite(pred), pred, np.nan)
    if _constant_values(pred):
        return None
    err = np.abs(y - pred)
    fit = fit_bits(float(np.where(np.isfinite(err), np.minimum(err, LOSS_CAP), LOSS_CAP).mean()), cfg.fit_epsilon)
    return ScoredCandidate(expr, fit, parsimony_measure(expr, cfg), frame_tag)


_WORKER: dict = {}


def _init_worker(data, cfg, frame_tag) -> None:
    _WORKER.update(data=data, cfg=cfg, frame_tag=frame_tag)


def _score_chunk(skeletons: Sequence[Expr]) -> list[ScoredCandidate]:
    data, cfg, tag = _WORKER["data"], _WORKER["cfg"], _WORKER["frame_tag"]
    scored = (score_skeleton(s, data, cfg, tag) for s in skeletons)
    return non_dominated(c for c in scored if c is not None)


def _chunks(cfg: SearchConfig, size: int):
    chunk: list[Expr] = []
    for skeleton in enumerate_skeletons(cfg):
        chunk.append(skeleton)
        if len(chunk) == size:
            yield chunk
            chunk = []
    if chunk:
        yield chunk


def discover(
    dataset: Mapping[str, np.ndarray],
    cfg: SearchConfig,
    workers: int = 1,
    frame_tag: str | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> list[ScoredCandidate]:
    """Exhaustive search under ``cfg``; returns the ordered Pareto frontier.

    Each chunk of skeletons is reduced to its own non-dominated set; the
    union of those sets is reduced again, so the frontier does not depend on
    ``workers`` or ``chunk_size``.
    """
    data = prepare_dataset(dataset, cfg)
    needed = {name: np.asarray(data[name], dtype=float) for name in (*cfg.inputs, cfg.target)}
    pooled: list[ScoredCandidate] = []
    if workers <= 1:
        _init_worker(needed, cfg, frame_tag)
        try:
            for chunk in _chunks(cfg, chunk_size):
                pooled.extend(_score_chunk(chunk))
        finally:
            _WORKER.clear()
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(needed, cfg, frame_tag)) as pool:
            for part in pool.map(_score_chunk, _chunks(cfg, chunk_size)):
                pooled.extend(part)
    front = pareto_front(pooled)
    if not front:
        raise SearchError(f"every candidate was discarded under {cfg.name}")
    return front


def sin_coefficient(expr: Expr) -> float | None:
    """``c`` when ``expr`` is ``c * sin_1`` or ``c * sin(M)``, else ``None``."""
    if not (isinstance(expr, Binary) and expr.op == "mul"):
        return None
    pairs = ((expr.left, expr.right), (expr.right, expr.left))
    for const, other in pairs:
        if not isinstance(const, Const):
            continue
        if isinstance(other, Var) and other.name == "sin_1":
            return const.value
        if isinstance(other, Unary) and other.op == "sin" and other.arg == Var("M"):
            return const.value
    return None


def first_harmonic_candidate(front: Sequence[ScoredCandidate]) -> ScoredCandidate | None:
    """The best-fitting frontier member of the form ``c * sin M``."""
    matches = [c for c in front if sin_coefficient(c.expression) is not None]
    return min(matches, key=lambda c: (c.fit, c.parsimony)) if matches else None
