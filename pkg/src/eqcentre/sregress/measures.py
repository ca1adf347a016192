"""Logarithm-scaled fit and parsimony measures, in bits."""

from __future__ import annotations

import math
from typing import Mapping

import numpy as np

from .config import SearchConfig
from .expr import Const, Expr, Var, evaluate
from .fitting import LOSS_CAP


def mean_absolute_error(expr: Expr, data: Mapping[str, np.ndarray], target) -> float:
    """MAE with out-of-domain rows (and huge errors) charged ``LOSS_CAP``."""
    y = np.asarray(data[target] if isinstance(target, str) else target, dtype=float)
    pred = np.broadcast_to(evaluate(expr, data), y.shape)
    err = np.abs(y - pred)
    err = np.where(np.isfinite(err), np.minimum(err, LOSS_CAP), LOSS_CAP)
    return float(err.mean())


def fit_bits(mae: float, fit_epsilon: float) -> float:
    """log2(1 + mae / fit_epsilon), accurate for tiny ratios."""
    return math.log1p(mae / fit_epsilon) / math.log(2.0)


def fit_measure(expr: Expr, data: Mapping[str, np.ndarray], target, fit_epsilon: float = 2.0**-30) -> float:
    """log2(1 + MAE / fit_epsilon)."""
    return fit_bits(mean_absolute_error(expr, data, target), fit_epsilon)


def parsimony_measure(expr: Expr, cfg: SearchConfig) -> float:
    """Sum of per-node costs in bits.

    Operators cost log2 of the vocabulary size, variables log2 of the number
    of inputs, constants log2(1 + |c| / grain). Both logarithms are floored
    at one bit so that adding any operator node strictly increases the total.
    """
    op_bits = math.log2(max(2, cfg.vocabulary.size))
    var_bits = math.log2(max(2, len(cfg.inputs)))
    total = 0.0
    for node in expr.walk():
        if isinstance(node, Const):
            if node.value is None:
                raise ValueError("cannot score a placeholder constant")
            total += math.log2(1.0 + abs(node.value) / cfg.const_grain)
        elif isinstance(node, Var):
            total += var_bits
        else:
            total += op_bits
    return total
