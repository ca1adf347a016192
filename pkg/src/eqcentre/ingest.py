"""Ephemeris ingestion: JPL Horizons observer tables and plain CSV.

Epochs are held as UTC seconds since 2000-01-01T12:00:00 (J2000), angles in
radians and geocentric distance in AU.
"""

from __future__ import annotations

import csv
import math
import re
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, FormatError, TransportError, ValidationError

TWO_PI = 2.0 * math.pi
J2000_UTC = datetime(2000, 1, 1, 12, 0, 0, tzinfo=timezone.utc)
TOOLKIT_COLUMNS = ("epoch_s", "ra_rad", "dec_rad", "delta_au")

_SEXAGESIMAL = re.compile(r"^\s*([+-]?)\s*(\d+)[\s:]+(\d+)[\s:]+(\d+(?:\.\d*)?)\s*$")
_DATE_FORMATS = (
    "%Y-%b-%d %H:%M",
    "%Y-%b-%d %H:%M:%S",
    "%Y-%b-%d %H:%M:%S.%f",
    "%Y-%m-%d %H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
)
# whitespace-separated Horizons rows (CSV_FORMAT=NO)
_WS_ROW = re.compile(
    r"^\s*(?:A\.D\.\s+)?(\d{4}-[A-Za-z]{3}-\d{2}\s+\d{2}:\d{2}(?::\d{2}(?:\.\d+)?)?)"
    r"\s+(?:[*CNAmrest]{1,2}\s+)*"
    r"(\d{1,2}\s+\d{1,2}\s+\d+(?:\.\d*)?)\s+"
    r"([+-]?\d{1,2}\s+\d{1,2}\s+\d+(?:\.\d*)?)\s+"
    r"([0-9.Ee+-]+)"
)


@dataclass(frozen=True)
class EphemerisRecord:
    """One timestamped observation in equatorial coordinates."""

    epoch: float
    ra: float
    dec: float
    delta: float

    def __post_init__(self) -> None:
        for name in ("epoch", "ra", "dec", "delta"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"{name} must be finite, got {getattr(self, name)!r}")
        if not 0.0 <= self.ra < TWO_PI:
            raise ValidationError(f"ra must lie in [0, 2pi), got {self.ra!r}")
        if not -math.pi / 2 <= self.dec <= math.pi / 2:
            raise ValidationError(f"dec must lie in [-pi/2, pi/2], got {self.dec!r}")
        if not self.delta > 0.0:
            raise ValidationError(f"delta must be positive, got {self.delta!r}")


@dataclass(frozen=True)
class HorizonsQuery:
    """Parameters for an observer-table request to the Horizons API."""

    target: str
    center: str
    start: datetime
    stop: datetime
    step_minutes: int
    quantities: tuple[str, ...] = ("2", "20")

    def __post_init__(self) -> None:
        if not self.start < self.stop:
            raise ValidationError("query start must precede stop")
        if int(self.step_minutes) != self.step_minutes or self.step_minutes < 1:
            raise ValidationError("step_minutes must be a positive integer")

    def params(self) -> dict[str, str]:
        fmt = "%Y-%m-%d %H:%M"
        return {
            "format": "text",
            "COMMAND": f"'{self.target}'",
            "CENTER": f"'{self.center}'",
            "MAKE_EPHEM": "'YES'",
            "EPHEM_TYPE": "'OBSERVER'",
            "OBJ_DATA": "'NO'",
            "START_TIME": f"'{self.start.strftime(fmt)}'",
            "STOP_TIME": f"'{self.stop.strftime(fmt)}'",
            "STEP_SIZE": f"'{self.step_minutes} m'",
            "QUANTITIES": "'" + ",".join(self.quantities) + "'",
            "ANG_FORMAT": "'HMS'",
            "CSV_FORMAT": "'YES'",
        }


@dataclass(frozen=True)
class ColumnMapping:
    """Which CSV columns hold the four record fields.

    ``angles`` is ``"radians"`` for decimal radians or ``"sexagesimal"`` for
    HMS/DMS text. ``epoch`` cells may be J2000 seconds or calendar dates.
    """

    epoch: str = "epoch_s"
    ra: str = "ra_rad"
    dec: str = "dec_rad"
    delta: str = "delta_au"
    angles: str = "radians"

    def __post_init__(self) -> None:
        if self.angles not in ("radians", "sexagesimal"):
            raise ConfigurationError(f"unknown angle encoding {self.angles!r}")


def hms_to_radians(h: int, m: int, s: float) -> float:
    """Convert hours-minutes-seconds of time to an angle in [0, 2pi)."""
    if not 0 <= h < 24:
        raise ValidationError(f"hours out of range [0, 24): {h}")
    if not 0 <= m < 60:
        raise ValidationError(f"minutes out of range [0, 60): {m}")
    if not 0.0 <= s < 60.0:
        raise ValidationError(f"seconds out of range [0, 60): {s}")
    angle = (h + m / 60.0 + s / 3600.0) * 15.0 * math.pi / 180.0
    angle = math.fmod(angle, TWO_PI)
    return 0.0 if angle >= TWO_PI else angle


def dms_to_radians(sign: int, d: int, m: int, s: float) -> float:
    """Convert signed degrees-minutes-seconds of arc to radians."""
    if sign not in (1, -1):
        raise ValidationError(f"sign must be +1 or -1, got {sign}")
    if not 0 <= m < 60:
        raise ValidationError(f"arcminutes out of range [0, 60): {m}")
    if not 0.0 <= s < 60.0:
        raise ValidationError(f"arcseconds out of range [0, 60): {s}")
    degrees = d + m / 60.0 + s / 3600.0
    if d < 0 or degrees > 90.0:
        raise ValidationError(f"declination magnitude exceeds 90 degrees: {degrees}")
    return sign * degrees * math.pi / 180.0


def _split_sexagesimal(text: str) -> tuple[int, int, int, float]:
    match = _SEXAGESIMAL.match(text)
    if match is None:
        raise FormatError(f"not a sexagesimal value: {text!r}")
    sign = -1 if match.group(1) == "-" else 1
    return sign, int(match.group(2)), int(match.group(3)), float(match.group(4))


def parse_ra(text: str) -> float:
    """Parse ``"06 02 16.18"`` or ``"06:02:16.18"`` into radians."""
    sign, h, m, s = _split_sexagesimal(text)
    if sign < 0:
        raise ValidationError(f"right ascension cannot be negative: {text!r}")
    return hms_to_radians(h, m, s)


def parse_dec(text: str) -> float:
    """Parse ``"+23 26 21.4"`` (sign optional) into radians."""
    sign, d, m, s = _split_sexagesimal(text)
    return dms_to_radians(sign, d, m, s)


def format_hms(ra: float, decimals: int = 8) -> str:
    """Format an angle as ``"HH MM SS.sss..."`` hours of time."""
    total = round(math.fmod(ra, TWO_PI) / TWO_PI * 86400.0, decimals)
    if total >= 86400.0:
        total -= 86400.0
    h, rem = divmod(total, 3600.0)
    m, s = divmod(rem, 60.0)
    return f"{int(h):02d} {int(m):02d} {s:0{3 + decimals}.{decimals}f}"


def format_dms(dec: float, decimals: int = 7) -> str:
    """Format an angle as ``"+DD MM SS.ss..."`` degrees of arc."""
    sign = "-" if dec < 0 else "+"
    total = round(abs(dec) * 180.0 / math.pi * 3600.0, decimals)
    d, rem = divmod(total, 3600.0)
    m, s = divmod(rem, 60.0)
    return f"{sign}{int(d):02d} {int(m):02d} {s:0{3 + decimals}.{decimals}f}"


def parse_epoch(text: str) -> float:
    """Parse a calendar date (UTC) or a bare number of J2000 seconds."""
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    for fmt in _DATE_FORMATS:
        try:
            moment = datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        except ValueError:
            continue
        return (moment - J2000_UTC).total_seconds()
    raise FormatError(f"unrecognised epoch {text!r}")


def epoch_to_datetime(epoch: float) -> datetime:
    return J2000_UTC + timedelta(seconds=epoch)


def check_monotonic(records: Sequence[EphemerisRecord]) -> None:
    """Raise ValidationError unless epochs are strictly increasing."""
    for i in range(1, len(records)):
        if not records[i].epoch > records[i - 1].epoch:
            raise ValidationError(
                f"epochs not strictly increasing at index {i}: "
                f"{records[i - 1].epoch!r} then {records[i].epoch!r}"
            )


def _sorted_unique(records: Iterable[EphemerisRecord]) -> tuple[EphemerisRecord, ...]:
    ordered = sorted(records, key=lambda r: r.epoch)
    for a, b in zip(ordered, ordered[1:]):
        if a.epoch == b.epoch:
            raise ValidationError(f"duplicate epoch {a.epoch!r}")
    return tuple(ordered)


def _csv_row_fields(fields: list[str]) -> tuple[str, str, str, str]:
    """Pick (date, ra, dec, delta) out of one comma-separated Horizons row."""
    date = fields[0]
    rest = [f.strip() for f in fields[1:]]
    ra_idx = next(
        (i for i, f in enumerate(rest) if _SEXAGESIMAL.match(f) and not f.startswith(("+", "-"))),
        None,
    )
    if ra_idx is None or ra_idx + 2 >= len(rest):
        raise FormatError("no RA/DEC/delta columns")
    dec = rest[ra_idx + 1]
    delta = next((f for f in rest[ra_idx + 2 :] if f), "")
    return date, rest[ra_idx], dec, delta


def parse_horizons_text(raw: str) -> tuple[EphemerisRecord, ...]:
    """Parse the ``$$SOE``/``$$EOE`` block of a Horizons observer table."""
    lines = raw.splitlines()
    try:
        start = next(i for i, line in enumerate(lines) if line.strip() == "$$SOE")
    except StopIteration:
        raise FormatError("missing $$SOE sentinel") from None
    try:
        stop = next(i for i in range(start + 1, len(lines)) if lines[i].strip() == "$$EOE")
    except StopIteration:
        raise FormatError("missing $$EOE sentinel") from None

    records = []
    for lineno in range(start + 1, stop):
        line = lines[lineno]
        if not line.strip():
            continue
        try:
            if "," in line:
                date, ra, dec, delta = _csv_row_fields(line.split(","))
            else:
                match = _WS_ROW.match(line)
                if match is None:
                    raise FormatError("unrecognised row layout")
                date, ra, dec, delta = match.groups()
            records.append(
                EphemerisRecord(
                    epoch=parse_epoch(re.sub(r"^\s*A\.D\.\s+", "", date)),
                    ra=parse_ra(ra),
                    dec=parse_dec(dec),
                    delta=float(delta),
                )
            )
        except (FormatError, ValidationError, ValueError) as exc:
            raise FormatError(f"line {lineno + 1}: {exc}") from exc
    return _sorted_unique(records)


def load_csv(path: str | Path, mapping: ColumnMapping | None = None) -> tuple[EphemerisRecord, ...]:
    """Read records from a CSV file; ``#`` comment lines are skipped."""
    mapping = mapping or ColumnMapping()
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        header = reader.fieldnames or []
        for key in ("epoch", "ra", "dec", "delta"):
            if getattr(mapping, key) not in header:
                raise ConfigurationError(f"column {getattr(mapping, key)!r} not in {path}")
        records = []
        for rowno, row in enumerate(reader, start=2):
            cells = {}
            for key in ("epoch", "ra", "dec", "delta"):
                column = getattr(mapping, key)
                cell = row[column]
                try:
                    if key == "epoch":
                        cells[key] = parse_epoch(cell)
                    elif key in ("ra", "dec") and mapping.angles == "sexagesimal":
                        cells[key] = parse_ra(cell) if key == "ra" else parse_dec(cell)
                    else:
                        cells[key] = float(cell)
                except (FormatError, ValueError, TypeError) as exc:
                    if isinstance(exc, ValidationError):
                        raise
                    raise FormatError(f"{path}: row {rowno}, column {column!r}: {exc}") from exc
            records.append(EphemerisRecord(**cells))
    return _sorted_unique(records)


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(
    records: Sequence[EphemerisRecord],
    path: str | Path,
    comments: Sequence[str] = (),
) -> None:
    """Write records in the toolkit CSV layout (lossless floats, LF endings)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        for comment in comments:
            fh.write(f"# {comment}\n")
        fh.write(",".join(TOOLKIT_COLUMNS) + "\n")
        for r in records:
            fh.write(",".join(format_float(v) for v in (r.epoch, r.ra, r.dec, r.delta)) + "\n")


def records_to_arrays(records: Sequence[EphemerisRecord]) -> dict[str, np.ndarray]:
    return {
        "epoch": np.array([r.epoch for r in records], dtype=float),
        "ra": np.array([r.ra for r in records], dtype=float),
        "dec": np.array([r.dec for r in records], dtype=float),
        "delta": np.array([r.delta for r in records], dtype=float),
    }


def fetch_horizons(q: HorizonsQuery, endpoint: str, timeout: float = 60.0) -> str:
    """Fetch a raw observer table. The body is returned unparsed."""
    url = endpoint + ("&" if "?" in endpoint else "?") + urllib.parse.urlencode(q.params())
    try:
        with urllib.request.urlopen(url, timeout=timeout) as response:
            status = getattr(response, "status", 200)
            body = response.read().decode("utf-8", errors="replace")
    except urllib.error.HTTPError as exc:
        raise TransportError(f"Horizons returned HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError, ValueError) as exc:
        raise TransportError(f"cannot reach {endpoint}: {exc}") from exc
    if not 200 <= status < 300:
        raise TransportError(f"Horizons returned HTTP {status}")
    if not body.strip():
        raise TransportError("Horizons returned an empty body")
    return body
