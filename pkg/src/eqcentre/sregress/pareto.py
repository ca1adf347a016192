"""Scored candidates and (fit, parsimony) Pareto frontiers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

from .expr import Expr, canonical_form, infix_form

TIE_TOLERANCE = 1e-9
FRONTIER_COLUMNS = ("rank", "expression_prefix", "expression_infix", "fit_bits", "parsimony_bits", "frame_tag")


def bucket(value: float) -> int:
    """Index of the 1e-9-wide cell holding ``value``; equal cells are ties."""
    return math.floor(value / TIE_TOLERANCE + 0.5)


@dataclass(frozen=True)
class ScoredCandidate:
    expression: Expr
    fit: float
    parsimony: float
    frame_tag: str | None = None
    prefix: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not (math.isfinite(self.fit) and math.isfinite(self.parsimony)):
            raise ValueError("candidate measures must be finite")
        if not self.prefix:
            object.__setattr__(self, "prefix", canonical_form(self.expression))

    @property
    def infix(self) -> str:
        return infix_form(self.expression)

    @property
    def point(self) -> tuple[int, int]:
        """(parsimony, fit) snapped to the tie grid."""
        return bucket(self.parsimony), bucket(self.fit)

    def dominates(self, other: "ScoredCandidate") -> bool:
        """No worse on both measures and better on one, beyond tie tolerance."""
        (p, f), (q, g) = self.point, other.point
        return p <= q and f <= g and (p, f) != (q, g)


def _tie_key(c: ScoredCandidate, frame_rank: dict[str | None, int]) -> tuple:
    return (c.prefix, frame_rank.get(c.frame_tag, len(frame_rank)), c.frame_tag or "")


def non_dominated(candidates: Iterable[ScoredCandidate]) -> list[ScoredCandidate]:
    """Every candidate not dominated by another, tied members included.

    Dominance is judged on the snapped measures, so it is transitive and
    reducing chunks separately before a final reduction changes nothing.
    """
    ordered = sorted(candidates, key=lambda c: c.point)
    kept: list[ScoredCandidate] = []
    best_fit = None  # smallest snapped fit over strictly smaller parsimony
    for _, group in groupby(ordered, key=lambda c: c.point[0]):
        group = list(group)
        group_min = group[0].point[1]
        if best_fit is None or group_min < best_fit:
            kept.extend(c for c in group if c.point[1] == group_min)
            best_fit = group_min
    return kept


def pareto_front(
    candidates: Iterable[ScoredCandidate], frame_order: Sequence[str | None] = ()
) -> list[ScoredCandidate]:
    """Non-dominated subset sorted by ascending parsimony.

    Measures within the same 1e-9 cell on both axes are ties; of those only
    the candidate with the smallest canonical text survives (then the
    earliest frame in ``frame_order``).
    """
    frame_rank = {tag: i for i, tag in enumerate(frame_order)}
    best: dict[tuple[int, int], tuple[tuple, ScoredCandidate]] = {}
    for c in non_dominated(candidates):
        key = _tie_key(c, frame_rank)
        if c.point not in best or key < best[c.point][0]:
            best[c.point] = (key, c)
    return [best[point][1] for point in sorted(best)]


def pareto_front_naive(
    candidates: Sequence[ScoredCandidate], frame_order: Sequence[str | None] = ()
) -> list[ScoredCandidate]:
    """O(n^2) reference implementation with the same tie rule."""
    frame_rank = {tag: i for i, tag in enumerate(frame_order)}
    cands = list(candidates)
    out = []
    for c in cands:
        if any(d.dominates(c) for d in cands):
            continue
        if any(d.point == c.point and _tie_key(d, frame_rank) < _tie_key(c, frame_rank) for d in cands):
            continue
        out.append(c)
    out.sort(key=lambda c: (c.point, _tie_key(c, frame_rank)))
    return out


def frontier_rows(front: Sequence[ScoredCandidate]) -> list[str]:
    lines = [",".join(FRONTIER_COLUMNS)]
    for rank, c in enumerate(front, start=1):
        lines.append(
            f'{rank},"{c.prefix}","{c.infix}",{c.fit:.17g},{c.parsimony:.17g},{c.frame_tag or ""}'
        )
    return lines


def write_frontier(front: Sequence[ScoredCandidate], path, comments: Sequence[str] = ()) -> None:
    """Write the frontier CSV (comment lines first)."""
    from pathlib import Path

    text = "".join(f"# {c}\n" for c in comments) + "\n".join(frontier_rows(front)) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_frontier(path) -> list[ScoredCandidate]:
    import csv
    from pathlib import Path

    from .expr import parse_prefix

    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        return [
            ScoredCandidate(
                parse_prefix(row["expression_prefix"]),
                float(row["fit_bits"]),
                float(row["parsimony_bits"]),
                row["frame_tag"] or None,
            )
            for row in reader
        ]
