"""Coordinate conversions, principal-plane fitting and origin translation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import AlignmentError, DegeneracyError, ValidationError
from .ingest import records_to_arrays

TWO_PI = 2.0 * math.pi
# mean obliquity of the ecliptic at J2000, 23.439279444 degrees
OBLIQUITY_J2000 = math.radians(23.439279444)

AXES_OPTIONS = ("equatorial", "ecliptic", "principal-plane")
ORIGIN_KINDS = ("body", "barycentre", "offset")


@dataclass(frozen=True)
class FrameSpec:
    """Origin plus axes choice for a reference frame.

    ``origin`` is ``"body"`` (``bodies`` holds one name), ``"barycentre"``
    (``bodies`` holds the members) or ``"offset"`` (``offset`` holds a fixed
    vector relative to ``bodies[0]``, or the name of a tabulated series).
    """

    origin: str
    bodies: tuple[str, ...] = ()
    axes: str = "principal-plane"
    offset: tuple[float, float, float] | None = None
    label: str | None = None

    def __post_init__(self) -> None:
        if self.origin not in ORIGIN_KINDS:
            raise ValidationError(f"unknown origin kind {self.origin!r}")
        if self.axes not in AXES_OPTIONS:
            raise ValidationError(f"unknown axes option {self.axes!r}")
        if not self.bodies:
            raise ValidationError("frame needs at least one body")
        if self.origin == "body" and len(self.bodies) != 1:
            raise ValidationError("body-centred frame takes exactly one body")
        if self.origin == "offset" and self.offset is None:
            raise ValidationError("offset frame needs an offset vector")

    @property
    def tag(self) -> str:
        if self.label:
            return self.label
        if self.origin == "body":
            where = f"body:{self.bodies[0]}"
        elif self.origin == "barycentre":
            where = "barycentre:" + "+".join(self.bodies)
        else:
            vec = ",".join(format(v, ".6g") for v in self.offset)
            where = f"offset:{self.bodies[0]}+({vec})"
        return f"{where}/{self.axes}"


@dataclass(frozen=True)
class FrameSeries:
    """Time-ordered cartesian positions (AU) tagged with their frame."""

    frame: FrameSpec | None
    epochs: np.ndarray
    positions: np.ndarray

    def __post_init__(self) -> None:
        epochs = np.asarray(self.epochs, dtype=float)
        positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        if len(epochs) != len(positions):
            raise ValidationError("epochs and positions differ in length")
        if len(epochs) > 1 and not np.all(np.diff(epochs) > 0):
            raise ValidationError("epochs must be strictly increasing")
        epochs.setflags(write=False)
        positions.setflags(write=False)
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "positions", positions)

    def __len__(self) -> int:
        return len(self.epochs)


@dataclass(frozen=True)
class PlaneBasis:
    """Centroid, orthonormal components (rows) and per-component variances.

    For a fitted principal plane the rows are ordered by descending variance;
    the third row is the plane normal.
    """

    centroid: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        centroid = np.asarray(self.centroid, dtype=float).reshape(3)
        components = np.asarray(self.components, dtype=float).reshape(3, 3)
        eigenvalues = np.asarray(self.eigenvalues, dtype=float).reshape(3)
        if np.max(np.abs(components @ components.T - np.eye(3))) > 1e-10:
            raise ValidationError("basis components are not orthonormal")
        for arr in (centroid, components, eigenvalues):
            arr.setflags(write=False)
        object.__setattr__(self, "centroid", centroid)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def normal(self) -> np.ndarray:
        return self.components[2]

    def to_csv(self, path: str | Path, comments: Sequence[str] = ()) -> None:
        """Write the basis as a small auditable CSV block."""
        rows = [("centroid", *self.centroid)]
        rows += [(f"component_{i + 1}", *c) for i, c in enumerate(self.components)]
        rows.append(("eigenvalues", *self.eigenvalues))
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            for comment in comments:
                fh.write(f"# {comment}\n")
            fh.write("row,x,y,z\n")
            for name, *values in rows:
                fh.write(name + "," + ",".join(format(float(v), ".17g") for v in values) + "\n")

    @classmethod
    def from_csv(cls, path: str | Path) -> "PlaneBasis":
        rows = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#") or line.startswith("row,"):
                continue
            name, *values = line.split(",")
            rows[name] = [float(v) for v in values]
        return cls(
            centroid=rows["centroid"],
            components=[rows[f"component_{i}"] for i in (1, 2, 3)],
            eigenvalues=rows["eigenvalues"],
        )


def rotation_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def equatorial_to_ecliptic(ra, dec, obliquity: float = OBLIQUITY_J2000):
    """Rotate equatorial (ra, dec) about the equinox axis into (lon, lat).

    Accepts scalars or numpy arrays; longitudes are reduced to [0, 2pi).
    """
    ra = np.asarray(ra, dtype=float)
    dec = np.asarray(dec, dtype=float)
    if np.any(np.abs(dec) > math.pi / 2):
        raise ValidationError("declination outside [-pi/2, pi/2]")
    ce, se = math.cos(obliquity), math.sin(obliquity)
    sin_lat = np.sin(dec) * ce - np.cos(dec) * se * np.sin(ra)
    lat = np.arcsin(np.clip(sin_lat, -1.0, 1.0))
    # atan2 form with cos(dec) factored in, so the poles stay finite
    y = np.sin(ra) * np.cos(dec) * ce + np.sin(dec) * se
    x = np.cos(ra) * np.cos(dec)
    lon = np.mod(np.arctan2(y, x), TWO_PI)
    lon = np.where(lon >= TWO_PI, 0.0, lon)
    if lon.ndim == 0:
        return float(lon), float(lat)
    return lon, lat


def ecliptic_to_equatorial(lon, lat, obliquity: float = OBLIQUITY_J2000):
    """Inverse of :func:`equatorial_to_ecliptic`."""
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    ce, se = math.cos(obliquity), math.sin(obliquity)
    sin_dec = np.sin(lat) * ce + np.cos(lat) * se * np.sin(lon)
    dec = np.arcsin(np.clip(sin_dec, -1.0, 1.0))
    y = np.sin(lon) * np.cos(lat) * ce - np.sin(lat) * se
    x = np.cos(lon) * np.cos(lat)
    ra = np.mod(np.arctan2(y, x), TWO_PI)
    ra = np.where(ra >= TWO_PI, 0.0, ra)
    if ra.ndim == 0:
        return float(ra), float(dec)
    return ra, dec


def spherical_to_cartesian(lon, lat, r):
    """(lon, lat, r) to cartesian; returns shape (..., 3)."""
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    r = np.asarray(r, dtype=float)
    cos_lat = np.cos(lat)
    return np.stack([r * cos_lat * np.cos(lon), r * cos_lat * np.sin(lon), r * np.sin(lat)], axis=-1)


def cartesian_to_spherical(xyz):
    """Cartesian (..., 3) to (lon in [0, 2pi), lat, r)."""
    xyz = np.asarray(xyz, dtype=float)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    r = np.sqrt(x * x + y * y + z * z)
    lon = np.mod(np.arctan2(y, x), TWO_PI)
    lon = np.where(lon >= TWO_PI, 0.0, lon)
    lat = np.arctan2(z, np.hypot(x, y))
    return lon, lat, r


def records_to_cartesian(records, system: str = "ecliptic", obliquity: float = OBLIQUITY_J2000) -> FrameSeries:
    """Build geocentric cartesian positions from ephemeris records."""
    cols = records_to_arrays(records)
    if system == "ecliptic":
        lon, lat = equatorial_to_ecliptic(cols["ra"], cols["dec"], obliquity)
    elif system == "equatorial":
        lon, lat = cols["ra"], cols["dec"]
    else:
        raise ValidationError(f"unknown coordinate system {system!r}")
    positions = spherical_to_cartesian(lon, lat, cols["delta"])
    return FrameSeries(FrameSpec("body", ("observer",), axes=system), cols["epoch"], positions)


def _sign_convention(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for i, v in enumerate(out):
        k = int(np.argmax(np.abs(v)))
        if v[k] < 0:
            out[i] = -v
    return out


def fit_principal_plane(points) -> PlaneBasis:
    """PCA of 3D points: centroid, components by descending variance.

    Each component is flipped so its largest-magnitude entry is positive, and
    the rows are then re-orthonormalised (Gram-Schmidt) so the basis is
    orthonormal to rounding.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        raise DegeneracyError("need at least 3 points to fit a plane")
    centroid = pts.mean(axis=0)
    centred = pts - centroid
    cov = centred.T @ centred / len(pts)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    scale = max(eigenvalues[0], np.finfo(float).tiny)
    if eigenvalues[1] < 1e-15 or eigenvalues[1] / scale < 1e-15:
        raise DegeneracyError("points are collinear or coincident")
    comps = _sign_convention(eigenvectors[:, order].T)
    q, _ = np.linalg.qr(comps.T)
    q = q.T
    q = np.where((np.sum(q * comps, axis=1) < 0)[:, None], -q, q)
    return PlaneBasis(centroid, q, eigenvalues)


def fixed_plane_basis(axes: str, points=None, obliquity: float = OBLIQUITY_J2000) -> PlaneBasis:
    """Basis for a fixed reference plane through the origin.

    ``axes`` is ``"ecliptic"`` (positions assumed ecliptic) or
    ``"equatorial"`` (the equator seen from ecliptic positions). Eigenvalues
    hold the mean-square extent along each axis when ``points`` are given.
    """
    if axes == "ecliptic":
        comps = np.eye(3)
    elif axes == "equatorial":
        # rows are the equatorial unit axes written in ecliptic coordinates
        comps = rotation_x(obliquity)
    else:
        raise ValidationError(f"no fixed plane for axes {axes!r}")
    variances = np.zeros(3)
    if points is not None:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        variances = np.mean((pts @ comps.T) ** 2, axis=0)
    return PlaneBasis(np.zeros(3), comps, variances)


def project_to_plane(points, basis: PlaneBasis) -> np.ndarray:
    """Coordinates along the first two components, relative to the centroid."""
    pts = np.asarray(points, dtype=float)
    centred = pts - basis.centroid
    return centred @ basis.components[:2].T


def out_of_plane(points, basis: PlaneBasis) -> np.ndarray:
    """Signed distance of each point along the plane normal."""
    pts = np.asarray(points, dtype=float)
    return (pts - basis.centroid) @ basis.normal


def embed_from_plane(planar, basis: PlaneBasis) -> np.ndarray:
    planar = np.asarray(planar, dtype=float)
    return basis.centroid + planar @ basis.components[:2]


def reconstruction_ratio(points, basis: PlaneBasis) -> float:
    """RMS out-of-plane distance over RMS distance from the centroid."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    resid = out_of_plane(pts, basis)
    radius = np.linalg.norm(pts - basis.centroid, axis=1)
    return float(np.sqrt(np.mean(resid**2)) / np.sqrt(np.mean(radius**2)))


def translate_origin(series: FrameSeries, offset, new_spec: FrameSpec | None, offset_epochs=None) -> FrameSeries:
    """Subtract an epoch-aligned origin offset from every position.

    ``offset`` is a (n, 3) array aligned with ``series.epochs`` or a
    :class:`FrameSeries`; when epochs are supplied they must match exactly.
    """
    if isinstance(offset, FrameSeries):
        offset_epochs = offset.epochs
        offset = offset.positions
    offset = np.asarray(offset, dtype=float)
    if offset.shape == (3,):
        offset = np.broadcast_to(offset, series.positions.shape)
    if offset.shape != series.positions.shape:
        raise AlignmentError(f"offset shape {offset.shape} != positions shape {series.positions.shape}")
    if offset_epochs is not None and not np.array_equal(np.asarray(offset_epochs, dtype=float), series.epochs):
        raise AlignmentError("offset epochs do not match series epochs")
    return FrameSeries(new_spec, series.epochs, series.positions - offset)
