"""Apsis detection, anomalistic-cycle segmentation and anomaly residuals.

The regression target is the residual v - M between the true anomaly measured
geometrically in the orbital plane and the mean anomaly obtained by
normalising time since perigee by the cycle duration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegeneracyError, SegmentationError, ValidationError
from .frames import (
    FrameSeries,
    PlaneBasis,
    fit_principal_plane,
    fixed_plane_basis,
    project_to_plane,
    reconstruction_ratio,
    records_to_cartesian,
)
from .kepler import solve_kepler_array, true_anomaly_from_E, wrap_pi

TWO_PI = 2.0 * math.pi
DEFAULT_WINDOW = 13
# Radius series whose relative spread is below this carry no apsis signal,
# only rounding noise (a circular orbit has no apsides).
FLAT_RADIUS_TOLERANCE = 1e-12
REGRESSION_COLUMNS = ("cycle", "epoch_s", "M_rad", "v_rad", "residual_rad")


@dataclass(frozen=True)
class ApsisEvent:
    epoch: float
    kind: str
    radius: float


@dataclass(frozen=True)
class CycleSegment:
    """One apogee-to-apogee slice of the dataset.

    ``rows`` indexes the parent arrays; ``epochs`` and ``positions`` are the
    corresponding views.
    """

    index: int
    start: float
    end: float
    perigee: float
    rows: slice
    epochs: np.ndarray
    positions: np.ndarray | None = None
    perigee_radius: float = math.nan
    apogee_radius: float = math.nan

    @property
    def duration(self) -> float:
        return self.end - self.start

    def __len__(self) -> int:
        return len(self.epochs)


@dataclass(frozen=True)
class AnomalySample:
    cycle: int
    epoch: float
    M: float
    v: float
    residual: float


@dataclass(frozen=True)
class ResidualTable:
    """Column arrays of the regression dataset."""

    cycle: np.ndarray
    epoch: np.ndarray
    M: np.ndarray
    v: np.ndarray
    residual: np.ndarray

    def __len__(self) -> int:
        return len(self.epoch)

    def __iter__(self) -> Iterator[AnomalySample]:
        for row in zip(self.cycle, self.epoch, self.M, self.v, self.residual):
            yield AnomalySample(int(row[0]), *(float(x) for x in row[1:]))

    def columns(self) -> dict[str, np.ndarray]:
        return {"M": self.M, "residual": self.residual, "v": self.v, "cycle": self.cycle, "epoch": self.epoch}

    def to_csv(self, path: str | Path, comments: Sequence[str] = ()) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            for comment in comments:
                fh.write(f"# {comment}\n")
            fh.write(",".join(REGRESSION_COLUMNS) + "\n")
            for c, t, m, v, r in zip(self.cycle, self.epoch, self.M, self.v, self.residual):
                fh.write(f"{int(c)},{t:.17g},{m:.17g},{v:.17g},{r:.17g}\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "ResidualTable":
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
        header = lines[0].split(",")
        if tuple(header) != REGRESSION_COLUMNS:
            raise ValidationError(f"{path}: unexpected header {header}")
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]], dtype=float).reshape(-1, 5)
        return cls(data[:, 0].astype(int), data[:, 1], data[:, 2], data[:, 3], data[:, 4])


def moving_average(values, window: int) -> np.ndarray:
    """Centred moving average; output[i] averages values[i : i + window]."""
    values = np.asarray(values, dtype=float)
    return np.convolve(values, np.ones(window) / window, mode="valid")


def detect_apsides(epochs, radii, window: int = DEFAULT_WINDOW) -> list[ApsisEvent]:
    """Perigee and apogee events from a radius series.

    The radii are smoothed with a centred moving average of width ``window``;
    a sample is an apogee (perigee) when it is the strict maximum (minimum)
    of the ``window`` smoothed values centred on it. Event times come from a
    parabola through the three neighbouring smoothed values. Consecutive
    events of the same kind keep only the more extreme one.
    """
    epochs = np.asarray(epochs, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if window < 3 or window % 2 == 0:
        raise ValidationError("window must be an odd integer >= 3")
    if len(epochs) != len(radii) or len(radii) < window:
        raise ValidationError("need matching epochs/radii at least one window long")
    half = window // 2
    smooth = moving_average(radii, window)
    scale = float(np.max(np.abs(smooth))) if len(smooth) else 0.0
    if len(smooth) and float(np.ptp(smooth)) <= FLAT_RADIUS_TOLERANCE * scale:
        raise SegmentationError("radius series is flat; apsides are undefined")
    times = epochs[half : len(epochs) - half]
    events: list[ApsisEvent] = []
    if len(smooth) >= window:
        windows = sliding_window_view(smooth, window)
        centre = windows[:, half]
        others = np.delete(windows, half, axis=1)
        is_max = centre > others.max(axis=1)
        is_min = centre < others.min(axis=1)
        for j in np.flatnonzero(is_max | is_min):
            i = j + half
            y0, y1, y2 = smooth[i - 1], smooth[i], smooth[i + 1]
            denom = y0 - 2.0 * y1 + y2
            delta = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
            if delta >= 0:
                t = times[i] + delta * (times[i + 1] - times[i])
            else:
                t = times[i] + delta * (times[i] - times[i - 1])
            r = y1 - 0.25 * (y0 - y2) * delta
            events.append(ApsisEvent(float(t), "apogee" if is_max[j] else "perigee", float(r)))

    events.sort(key=lambda ev: ev.epoch)
    alternating: list[ApsisEvent] = []
    for ev in events:
        if alternating and alternating[-1].kind == ev.kind:
            prev = alternating[-1]
            stronger = ev.radius > prev.radius if ev.kind == "apogee" else ev.radius < prev.radius
            if stronger:
                alternating[-1] = ev
            continue
        alternating.append(ev)
    if len(alternating) < 2:
        raise SegmentationError(f"found {len(alternating)} apsides; need at least 2")
    return alternating


def _epochs_of(records) -> np.ndarray:
    if isinstance(records, FrameSeries):
        return records.epochs
    if isinstance(records, np.ndarray):
        return records.astype(float)
    return np.array([r.epoch for r in records], dtype=float)


def segment_anomalistic_cycles(records, apsides: Sequence[ApsisEvent], positions=None) -> list[CycleSegment]:
    """Split data into apogee-to-apogee cycles, each holding one perigee.

    ``records`` may be a record sequence, a :class:`FrameSeries` or an epoch
    array. Rows before the first and after the last apogee are dropped;
    each interior row belongs to exactly one cycle, ``[start, end)``, except
    that the final cycle also keeps a row falling exactly on its end.
    """
    epochs = _epochs_of(records)
    if positions is None and isinstance(records, FrameSeries):
        positions = records.positions
    apogees = [ev for ev in apsides if ev.kind == "apogee"]
    perigees = [ev for ev in apsides if ev.kind == "perigee"]
    if len(apogees) < 2:
        raise SegmentationError(f"need at least 2 apogees, got {len(apogees)}")
    segments = []
    for k, (a0, a1) in enumerate(zip(apogees, apogees[1:]), start=1):
        inside = [p for p in perigees if a0.epoch < p.epoch < a1.epoch]
        if not inside:
            raise SegmentationError(f"cycle {k} contains no perigee")
        perigee = min(inside, key=lambda p: p.radius)
        lo = int(np.searchsorted(epochs, a0.epoch, side="left"))
        last = k == len(apogees) - 1
        hi = int(np.searchsorted(epochs, a1.epoch, side="right" if last else "left"))
        rows = slice(lo, hi)
        segments.append(
            CycleSegment(
                index=k,
                start=a0.epoch,
                end=a1.epoch,
                perigee=perigee.epoch,
                rows=rows,
                epochs=epochs[rows],
                positions=None if positions is None else np.asarray(positions)[rows],
                perigee_radius=perigee.radius,
                apogee_radius=0.5 * (a0.radius + a1.radius),
            )
        )
    return segments


def mean_anomaly(segment: CycleSegment) -> tuple[np.ndarray, np.ndarray]:
    """(epochs, M) with M = 2pi ((t - t_perigee) mod D) / D in [0, 2pi)."""
    D = segment.duration
    phase = np.mod(segment.epochs - segment.perigee, D) / D
    M = TWO_PI * phase
    M = np.where(M >= TWO_PI, 0.0, M)
    return segment.epochs, M


def _unwrapped_mean_anomaly(segment: CycleSegment) -> np.ndarray:
    return TWO_PI * (segment.epochs - segment.perigee) / segment.duration


def true_anomaly_geometric(segment: CycleSegment, basis: PlaneBasis, focus=(0.0, 0.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """(epochs, v): polar angle about the projected focus, zero at perigee.

    The angle is unwrapped along the segment, oriented so it increases with
    the motion, and referenced to its value interpolated at the perigee epoch.
    """
    if segment.positions is None:
        raise ValidationError("segment carries no positions")
    planar = project_to_plane(segment.positions, basis) - project_to_plane(np.asarray(focus, dtype=float), basis)
    nearest = int(np.argmin(np.abs(segment.epochs - segment.perigee)))
    if np.hypot(*planar[nearest]) < 1e-300:
        raise DegeneracyError("perigee position coincides with the focus")
    theta = np.unwrap(np.arctan2(planar[:, 1], planar[:, 0]))
    if len(theta) > 1 and theta[-1] < theta[0]:
        theta = -theta
    v = theta - np.interp(segment.perigee, segment.epochs, theta)
    return segment.epochs, v


@dataclass(frozen=True)
class PreprocessResult:
    table: ResidualTable
    basis: PlaneBasis
    apsides: list[ApsisEvent]
    segments: list[CycleSegment]
    diagnostics: dict = field(default_factory=dict)


def residual_series(segments: Sequence[CycleSegment], basis: PlaneBasis, focus=(0.0, 0.0, 0.0)) -> ResidualTable:
    """Per-row (cycle, M, v, v - M) with the residual wrapped into (-pi, pi].

    v is stored on the branch of M, so ``residual == v - M`` as stored.
    """
    parts = []
    for seg in segments:
        epochs, M = mean_anomaly(seg)
        _, v = true_anomaly_geometric(seg, basis, focus)
        resid = np.asarray(wrap_pi(v - M), dtype=float)
        v_on_branch = M + resid
        parts.append((np.full(len(epochs), seg.index), epochs, M, v_on_branch, v_on_branch - M))
    if not parts:
        raise SegmentationError("no cycles to process")
    cols = [np.concatenate(c) for c in zip(*parts)]
    return ResidualTable(cols[0].astype(int), *cols[1:])


def kepler_path_discrepancy(segment: CycleSegment, basis: PlaneBasis, focus=(0.0, 0.0, 0.0)) -> tuple[float, float]:
    """Compare geometric v with a Kepler solve at the cycle's apsis eccentricity.

    Returns (eccentricity estimate, max |v_geometric - v_kepler|).
    """
    rp, ra = segment.perigee_radius, segment.apogee_radius
    e = (ra - rp) / (ra + rp)
    _, v_geo = true_anomaly_geometric(segment, basis, focus)
    M = _unwrapped_mean_anomaly(segment)
    v_kep = true_anomaly_from_E(solve_kepler_array(M, e), e)
    return float(e), float(np.max(np.abs(wrap_pi(v_geo - v_kep))))


def preprocess_series(
    series: FrameSeries,
    *,
    axes: str = "principal-plane",
    apsis_source: str = "radius",
    window: int = DEFAULT_WINDOW,
    focus=(0.0, 0.0, 0.0),
    apsides: Sequence[ApsisEvent] | None = None,
) -> PreprocessResult:
    """Plane fit, apsis detection, segmentation and residuals for one frame.

    ``apsides`` may supply known apsis events (e.g. from a generator), which
    skips detection; a circular orbit has no detectable apsides.
    """
    positions = series.positions
    focus = np.asarray(focus, dtype=float)
    if axes == "principal-plane":
        basis = fit_principal_plane(positions)
    else:
        basis = fixed_plane_basis(axes, positions)
    if apsides is not None:
        apsides = sorted(apsides, key=lambda ev: ev.epoch)
    elif apsis_source == "radius":
        radii = np.linalg.norm(positions - focus, axis=1)
    elif apsis_source == "planar":
        planar = project_to_plane(positions, basis) - project_to_plane(focus, basis)
        radii = np.hypot(planar[:, 0], planar[:, 1])
    else:
        raise ValidationError(f"unknown apsis source {apsis_source!r}")
    if apsides is None:
        apsides = detect_apsides(series.epochs, radii, window)
    segments = segment_anomalistic_cycles(series, apsides)
    table = residual_series(segments, basis, focus)
    in_span = int(np.count_nonzero((series.epochs >= segments[0].start) & (series.epochs <= segments[-1].end)))
    kepler = [kepler_path_discrepancy(s, basis, focus) for s in segments]
    diagnostics = {
        "records": len(series),
        "records_in_span": in_span,
        "records_in_cycles": len(table),
        "cycles": len(segments),
        "cycle_durations_days": [s.duration / 86400.0 for s in segments],
        "cycle_records": [len(s) for s in segments],
        "reconstruction_ratio": reconstruction_ratio(positions, basis),
        "eigenvalues": basis.eigenvalues.tolist(),
        "eccentricity_from_apsides": [k[0] for k in kepler],
        "kepler_path_max_discrepancy_rad": max(k[1] for k in kepler),
        "max_abs_residual_rad": float(np.max(np.abs(table.residual))),
    }
    return PreprocessResult(table, basis, apsides, segments, diagnostics)


def preprocess_records(
    records,
    *,
    coordinate_system: str = "ecliptic",
    apsis_source: str = "radius",
    window: int = DEFAULT_WINDOW,
    apsides: Sequence[ApsisEvent] | None = None,
) -> PreprocessResult:
    """Geocentric ephemeris records to the residual regression dataset."""
    series = records_to_cartesian(records, coordinate_system)
    return preprocess_series(series, apsis_source=apsis_source, window=window, apsides=apsides)
