"""Two-body ground truth: Keplerian propagation and ephemeris-like datasets.

Noise is drawn from numpy's PCG64 bit generator (``numpy.random.default_rng``)
seeded with :attr:`SynthSpec.seed`, so a spec always yields the same dataset.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .cycles import ApsisEvent
from .errors import DegeneracyError, ValidationError
from .frames import (
    OBLIQUITY_J2000,
    FrameSeries,
    FrameSpec,
    cartesian_to_spherical,
    ecliptic_to_equatorial,
    rotation_x,
    rotation_z,
)
from .ingest import J2000_UTC, EphemerisRecord
from .kepler import solve_kepler_array, true_anomaly_from_E

DAY = 86400.0
ANOMALISTIC_MONTH_DAYS = 27.55
EARTH_MOON_MU = 0.0123
NOISE_GENERATOR = "PCG64"


def _epoch_of(moment: datetime) -> float:
    return (moment - J2000_UTC).total_seconds()


DEFAULT_START = _epoch_of(datetime(2024, 1, 1, tzinfo=timezone.utc))
DEFAULT_STOP = _epoch_of(datetime(2025, 1, 1, tzinfo=timezone.utc))


@dataclass(frozen=True)
class OrbitalElements:
    """Keplerian elements; angles in radians, period in seconds.

    ``epoch`` is the J2000-seconds instant at which the mean anomaly is
    ``mean_anomaly``. The default ``mean_anomaly`` of 3.0 rad puts the first
    apogee about 15 hours after a 2024-01-01 start, as for the real Moon.
    """

    a: float = 0.00257
    e: float = 0.0549
    inclination: float = math.radians(5.145)
    node: float = 0.0
    argp: float = 0.0
    mean_anomaly: float = 3.0
    period: float = ANOMALISTIC_MONTH_DAYS * DAY
    epoch: float = DEFAULT_START

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ValidationError("semi-major axis must be positive")
        if not 0.0 <= self.e < 1.0:
            raise ValidationError("eccentricity must satisfy 0 <= e < 1")
        if not self.period > 0:
            raise ValidationError("period must be positive")

    def mean_anomaly_at(self, epochs) -> np.ndarray:
        t = np.asarray(epochs, dtype=float)
        return self.mean_anomaly + 2.0 * math.pi * (t - self.epoch) / self.period

    def rotation(self) -> np.ndarray:
        """Perifocal-to-reference rotation R_z(node) R_x(i) R_z(argp)."""
        return rotation_z(self.node) @ rotation_x(self.inclination) @ rotation_z(self.argp)


def hourly_epochs(start: float = DEFAULT_START, stop: float = DEFAULT_STOP, step_minutes: int = 60) -> np.ndarray:
    """Inclusive grid from start to stop."""
    step = step_minutes * 60.0
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


@dataclass(frozen=True)
class SynthSpec:
    elements: OrbitalElements = field(default_factory=OrbitalElements)
    start: float = DEFAULT_START
    stop: float = DEFAULT_STOP
    step_minutes: int = 60
    sigma_angle: float = 0.0
    sigma_distance: float = 0.0
    seed: int = 0
    observer_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        for name in ("sigma_angle", "sigma_distance"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and non-negative")
        if not self.stop > self.start:
            raise ValidationError("stop must follow start")
        if self.step_minutes < 1:
            raise ValidationError("step_minutes must be >= 1")

    def epochs(self) -> np.ndarray:
        return hourly_epochs(self.start, self.stop, self.step_minutes)


def perifocal_state(elements: OrbitalElements, epochs):
    """Mean, eccentric and true anomaly plus perifocal positions."""
    M = elements.mean_anomaly_at(epochs)
    E = solve_kepler_array(M, elements.e, 1e-14)
    v = true_anomaly_from_E(E, elements.e)
    a, e = elements.a, elements.e
    pos = np.stack([a * (np.cos(E) - e), a * math.sqrt(1.0 - e * e) * np.sin(E), np.zeros_like(E)], axis=-1)
    return M, E, v, pos


def propagate_kepler(elements: OrbitalElements, epochs) -> FrameSeries:
    """Focus-centred positions (ecliptic axes) of the orbiting body."""
    epochs = np.asarray(epochs, dtype=float)
    _, _, _, pos = perifocal_state(elements, epochs)
    positions = pos @ elements.rotation().T
    return FrameSeries(FrameSpec("body", ("primary",), axes="ecliptic"), epochs, positions)


def apsis_epochs(elements: OrbitalElements, start: float, stop: float) -> dict[str, list[float]]:
    """Exact perigee (M = 0 mod 2pi) and apogee (M = pi mod 2pi) epochs."""
    out: dict[str, list[float]] = {"perigee": [], "apogee": []}
    n = 2.0 * math.pi / elements.period
    for kind, phase in (("perigee", 0.0), ("apogee", math.pi)):
        k0 = math.ceil((elements.mean_anomaly_at(start) - phase) / (2 * math.pi))
        k = k0
        while True:
            t = elements.epoch + (phase + 2 * math.pi * k - elements.mean_anomaly) / n
            if t > stop:
                break
            if t >= start:
                out[kind].append(t)
            k += 1
    return out


def truth_apsides(spec: SynthSpec) -> list[ApsisEvent]:
    """The generator's exact apsis events over the spec's epoch grid.

    Radii are the focus distances a(1 -/+ e); with an observer offset they
    are still the orbit's apsides, not extrema of the observed distance.
    """
    epochs = spec.epochs()
    times = apsis_epochs(spec.elements, float(epochs[0]), float(epochs[-1]))
    a, e = spec.elements.a, spec.elements.e
    radius = {"perigee": a * (1.0 - e), "apogee": a * (1.0 + e)}
    events = [ApsisEvent(t, kind, radius[kind]) for kind, ts in times.items() for t in ts]
    return sorted(events, key=lambda ev: ev.epoch)


def synth_positions(spec: SynthSpec) -> FrameSeries:
    """Body positions relative to the (possibly displaced) observer."""
    series = propagate_kepler(spec.elements, spec.epochs())
    offset = np.asarray(spec.observer_offset, dtype=float)
    return FrameSeries(series.frame, series.epochs, series.positions - offset)


def synth_dataset(spec: SynthSpec, obliquity: float = OBLIQUITY_J2000) -> tuple[EphemerisRecord, ...]:
    """Ephemeris records (ra, dec, delta) of the synthetic body.

    Propagated positions are taken as ecliptic cartesian, shifted by the
    observer offset, rotated to equatorial angles, then perturbed with
    Gaussian noise (``sigma_angle`` on ra and dec, ``sigma_distance`` on delta).
    """
    series = synth_positions(spec)
    lon, lat, r = cartesian_to_spherical(series.positions)
    if np.any(r <= 0):
        raise DegeneracyError("observer coincides with the body")
    ra, dec = ecliptic_to_equatorial(lon, lat, obliquity)
    rng = np.random.default_rng(spec.seed)
    n = len(ra)
    if spec.sigma_angle > 0:
        ra = np.mod(ra + rng.normal(0.0, spec.sigma_angle, n), 2 * math.pi)
        dec = np.clip(dec + rng.normal(0.0, spec.sigma_angle, n), -math.pi / 2, math.pi / 2)
    if spec.sigma_distance > 0:
        r = r + rng.normal(0.0, spec.sigma_distance, n)
        if np.any(r <= 0):
            raise DegeneracyError("noise drove a distance non-positive")
    ra = np.where(ra >= 2 * math.pi, 0.0, ra)
    return tuple(
        EphemerisRecord(float(t), float(a), float(d), float(x))
        for t, a, d, x in zip(series.epochs, ra, dec, r)
    )


def ground_truth(spec: SynthSpec) -> dict:
    """Sidecar content: elements, seed, apsis epochs and exact M, v per epoch."""
    epochs = spec.epochs()
    M, _, v, _ = perifocal_state(spec.elements, epochs)
    return {
        "elements": asdict(spec.elements),
        "seed": spec.seed,
        "noise_generator": NOISE_GENERATOR,
        "sigma_angle": spec.sigma_angle,
        "sigma_distance": spec.sigma_distance,
        "observer_offset": list(spec.observer_offset),
        "apsides": apsis_epochs(spec.elements, float(epochs[0]), float(epochs[-1])),
        "epoch_s": epochs.tolist(),
        "M_rad": M.tolist(),
        "v_rad": v.tolist(),
    }


def write_ground_truth(spec: SynthSpec, path: str | Path, comments: Sequence[str] = ()) -> None:
    payload = {"comments": list(comments), **ground_truth(spec)}
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def two_body_positions(spec: SynthSpec, mu: float) -> dict[str, FrameSeries]:
    """Barycentric positions of the primary and the secondary.

    ``mu`` is the secondary's mass fraction; the relative orbit comes from
    ``spec.elements``.
    """
    if not 0.0 < mu < 1.0:
        raise ValidationError("mass fraction must satisfy 0 < mu < 1")
    rel = propagate_kepler(spec.elements, spec.epochs())
    bary = FrameSpec("barycentre", ("primary", "secondary"), axes="ecliptic")
    return {
        "primary": FrameSeries(bary, rel.epochs, -mu * rel.positions),
        "secondary": FrameSeries(bary, rel.epochs, (1.0 - mu) * rel.positions),
    }


def two_body_frames(spec: SynthSpec, mu: float) -> dict[str, FrameSeries]:
    """The secondary seen from the primary and barycentre, and vice versa."""
    bodies = two_body_positions(spec, mu)
    p, s = bodies["primary"], bodies["secondary"]
    return {
        "primary-centred": FrameSeries(
            FrameSpec("body", ("primary",), axes="ecliptic"), p.epochs, s.positions - p.positions
        ),
        "secondary-centred": FrameSeries(
            FrameSpec("body", ("secondary",), axes="ecliptic"), p.epochs, p.positions - s.positions
        ),
        "barycentric": s,
    }
