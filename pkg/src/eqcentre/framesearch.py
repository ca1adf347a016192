"""Search over candidate reference frames with a merged, frame-tagged frontier.

Each frame re-expresses a target body's trajectory about a different origin
(a body, a barycentre of several bodies, or a fixed displacement from a
body), runs the residual preprocessing there and searches for equations.
The per-frame frontiers are merged into one Pareto frontier whose members
keep the tag of the frame that produced them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from itertools import chain
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cycles import DEFAULT_WINDOW, preprocess_series
from .errors import AlignmentError, ConfigurationError, SearchError, ToolkitError
from .frames import AXES_OPTIONS, FrameSeries, FrameSpec, translate_origin
from .sregress.config import SearchConfig
from .sregress.pareto import ScoredCandidate, pareto_front
from .sregress.search import discover

DIAGNOSTIC_COLUMNS = (
    "frame_tag",
    "status",
    "records",
    "records_in_cycles",
    "cycles",
    "frontier_size",
    "best_fit_bits",
    "reason",
)


@dataclass(frozen=True)
class FrameCatalog:
    """Candidate frames plus the epoch-aligned body tables they resolve against.

    Tables hold cartesian positions (AU) on ecliptic axes in one common
    inertial frame; ``masses`` are only needed for barycentric frames.
    """

    frames: tuple[FrameSpec, ...]
    tables: Mapping[str, FrameSeries]
    masses: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.frames:
            raise ConfigurationError("frame catalog is empty")
        if not self.tables:
            raise ConfigurationError("frame catalog has no body tables")
        epochs = next(iter(self.tables.values())).epochs
        for name, table in self.tables.items():
            if not np.array_equal(table.epochs, epochs):
                raise AlignmentError(f"table for {name!r} is not epoch-aligned with the others")
        tags = [f.tag for f in self.frames]
        if len(set(tags)) != len(tags):
            raise ConfigurationError("duplicate frame tags in catalog")
        for frame in self.frames:
            self.origin_of(frame)  # raises if unresolvable

    @property
    def epochs(self) -> np.ndarray:
        return next(iter(self.tables.values())).epochs

    @property
    def tags(self) -> list[str]:
        return [f.tag for f in self.frames]

    def _table(self, body: str) -> np.ndarray:
        try:
            return self.tables[body].positions
        except KeyError:
            raise ConfigurationError(f"no position table for body {body!r}") from None

    def origin_of(self, frame: FrameSpec) -> np.ndarray:
        """Per-epoch origin positions (n, 3) of ``frame``."""
        if frame.origin == "body":
            return self._table(frame.bodies[0])
        if frame.origin == "offset":
            return self._table(frame.bodies[0]) + np.asarray(frame.offset, dtype=float)
        missing = [b for b in frame.bodies if b not in self.masses]
        if missing:
            raise ConfigurationError(f"barycentre needs masses for {missing}")
        weights = np.array([self.masses[b] for b in frame.bodies], dtype=float)
        if not np.all(weights > 0):
            raise ConfigurationError("barycentre masses must be positive")
        stacked = np.stack([self._table(b) for b in frame.bodies])
        return np.tensordot(weights, stacked, axes=1) / weights.sum()


def enumerate_frames(
    tables: Mapping[str, FrameSeries],
    masses: Mapping[str, float] | None = None,
    axes: Sequence[str] = ("principal-plane",),
    barycentres: Sequence[Sequence[str]] = (),
    offsets: Sequence[tuple[str, tuple[float, float, float]]] = (),
    bodies: Sequence[str] | None = None,
) -> FrameCatalog:
    """Body-centred frames for each body, then each requested barycentre and
    displaced origin, every one crossed with each axes option.

    Frames are listed in that order, which is also the tie-break order of the
    unified frontier.
    """
    masses = dict(masses or {})
    for option in axes:
        if option not in AXES_OPTIONS:
            raise ConfigurationError(f"unknown axes option {option!r}")
    for group in barycentres:
        if len(group) < 2:
            raise ConfigurationError("a barycentre needs at least two bodies")
        missing = [b for b in group if b not in masses]
        if missing:
            raise ConfigurationError(f"barycentre {'+'.join(group)} lacks masses for {missing}")
    names = list(tables) if bodies is None else list(bodies)
    frames = [FrameSpec("body", (b,), axes=a) for b in names for a in axes]
    frames += [FrameSpec("barycentre", tuple(g), axes=a) for g in barycentres for a in axes]
    frames += [FrameSpec("offset", (b,), axes=a, offset=tuple(map(float, v))) for b, v in offsets for a in axes]
    return FrameCatalog(tuple(frames), dict(tables), masses)


@dataclass(frozen=True)
class FrameResult:
    frame: FrameSpec
    candidates: tuple[ScoredCandidate, ...]
    diagnostics: dict

    @property
    def tag(self) -> str:
        return self.frame.tag


def run_frame(
    frame: FrameSpec,
    catalog: FrameCatalog,
    target: str | FrameSeries,
    cfg: SearchConfig,
    *,
    apsis_source: str = "radius",
    window: int = DEFAULT_WINDOW,
    workers: int = 1,
) -> FrameResult:
    """Translate, preprocess and search one frame.

    Failures (degenerate plane, no apsides, empty frontier, ...) are caught
    and reported in the diagnostics with an empty candidate set.
    """
    raw = catalog.tables[target] if isinstance(target, str) else target
    diag: dict = {"frame_tag": frame.tag, "records": len(raw), "status": "ok", "reason": ""}
    try:
        if not np.array_equal(raw.epochs, catalog.epochs):
            raise AlignmentError("target series is not epoch-aligned with the catalog")
        moved = translate_origin(raw, catalog.origin_of(frame), frame)
        prep = preprocess_series(moved, axes=frame.axes, apsis_source=apsis_source, window=window)
        diag.update(
            records_in_cycles=prep.diagnostics["records_in_cycles"],
            cycles=prep.diagnostics["cycles"],
            max_abs_residual_rad=prep.diagnostics["max_abs_residual_rad"],
        )
        front = discover(prep.table.columns(), cfg, workers=workers, frame_tag=frame.tag)
    except ToolkitError as exc:
        diag.update(status="failed", reason=f"{type(exc).__name__}: {exc}")
        return FrameResult(frame, (), diag)
    diag.update(frontier_size=len(front), best_fit_bits=min(c.fit for c in front))
    return FrameResult(frame, tuple(front), diag)


def unified_frontier(results: Sequence[FrameResult], frame_order: Sequence[str] | None = None) -> list[ScoredCandidate]:
    """Pareto frontier over every frame's candidates, tags preserved.

    Ties are broken as in single-frame search, then by ``frame_order``
    (default: the order of ``results``).
    """
    order = list(frame_order) if frame_order is not None else [r.tag for r in results]
    pooled = list(chain.from_iterable(r.candidates for r in results))
    if not pooled:
        reasons = "; ".join(f"{r.tag}: {r.diagnostics.get('reason') or 'no candidates'}" for r in results)
        raise SearchError(f"every frame failed ({reasons})")
    return pareto_front(pooled, order)


@dataclass(frozen=True)
class FrameSearchResult:
    frontier: list[ScoredCandidate]
    results: tuple[FrameResult, ...]

    def winner(self, fit_window: float = 1.0) -> ScoredCandidate:
        """Most parsimonious frontier member within ``fit_window`` bits of the best fit."""
        best = min(c.fit for c in self.frontier)
        close = [c for c in self.frontier if c.fit <= best + fit_window]
        return min(close, key=lambda c: (c.parsimony, c.fit))


def run_catalog(
    catalog: FrameCatalog,
    target: str | FrameSeries,
    cfg: SearchConfig,
    *,
    apsis_source: str = "radius",
    window: int = DEFAULT_WINDOW,
    workers: int = 1,
) -> FrameSearchResult:
    """Run every frame in catalog order and merge the results."""
    results = tuple(
        run_frame(f, catalog, target, cfg, apsis_source=apsis_source, window=window, workers=workers)
        for f in catalog.frames
    )
    return FrameSearchResult(unified_frontier(results, catalog.tags), results)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g") if math.isfinite(value) else ""
    return str(value)


def write_diagnostics(results: Sequence[FrameResult], path: str | Path, comments: Sequence[str] = ()) -> None:
    """Per-frame report: tag, status, record and cycle counts, failure reason."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for r in results:
            writer.writerow([_cell(r.diagnostics.get(col)) for col in DIAGNOSTIC_COLUMNS])
