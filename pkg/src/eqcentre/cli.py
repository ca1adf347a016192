"""Command-line front end: ``eqcentre <command> [--config FILE] [--set key=value]``.

Configuration is one flat ``key = value`` file (``#`` comments allowed);
``--set`` pairs and dedicated flags override it, and built-in defaults fill
the rest. Every output file starts with comment lines naming the toolkit
version, the command and a hash of the resolved configuration. Wall-clock
runtime is printed to stdout only, so reruns write byte-identical files.

Exit status: 0 success, 2 input/configuration error, 3 transport error,
4 numeric or search error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .cycles import ApsisEvent, ResidualTable, preprocess_records
from .errors import ConfigurationError, FormatError, InputError, ToolkitError
from .frames import AXES_OPTIONS, FrameSeries, FrameSpec, records_to_cartesian
from .framesearch import FrameCatalog, run_catalog, write_diagnostics
from .ingest import (
    ColumnMapping,
    HorizonsQuery,
    epoch_to_datetime,
    fetch_horizons,
    load_csv,
    parse_epoch,
    parse_horizons_text,
    write_csv,
)
from .kepler import centre_bessel_series, centre_coefficient_c1, centre_exact, invert_c1
from .sregress.config import VOCABULARIES, SearchConfig, experiment_preset
from .sregress.pareto import write_frontier
from .sregress.search import discover, first_harmonic_candidate, sin_coefficient
from .synth import (
    ANOMALISTIC_MONTH_DAYS,
    DAY,
    NOISE_GENERATOR,
    OrbitalElements,
    SynthSpec,
    synth_dataset,
    two_body_positions,
    write_ground_truth,
)

COMMANDS = ("ingest", "preprocess", "discover", "frames", "oracle", "synth")

DEFAULTS: dict[str, str] = {
    "output_dir": ".",
    "seed": "0",
    "workers": "1",
    # ingest
    "input": "",
    "input_format": "auto",
    "csv_epoch_column": "epoch_s",
    "csv_ra_column": "ra_rad",
    "csv_dec_column": "dec_rad",
    "csv_delta_column": "delta_au",
    "csv_angles": "radians",
    "fetch_endpoint": "",
    "fetch_target": "",
    "fetch_center": "500@399",
    "fetch_start": "2024-01-01 00:00",
    "fetch_stop": "2025-01-01 00:00",
    "fetch_step_minutes": "60",
    "fetch_timeout": "60",
    "ephemeris_file": "ephemeris.csv",
    # preprocess
    "ephemeris": "",
    "coordinate_system": "ecliptic",
    "apsis_source": "radius",
    "window": "13",
    "apsides_file": "",
    "residuals_file": "residuals.csv",
    # discover
    "residuals": "",
    "experiment": "3",
    "vocabulary": "",
    "max_nodes": "",
    "inputs": "",
    "target": "",
    "harmonics": "",
    "max_constants": "",
    "fit_epsilon": "",
    "const_grain": "",
    "frontier_file": "frontier.csv",
    # frames
    "frames_source": "synth",
    "frames": "body:primary; barycentre:primary+secondary",
    "frames_axes": "principal-plane",
    "frames_target": "secondary",
    "masses": "",
    # oracle
    "oracle_e": "0.0549",
    "oracle_step": "0.01",
    "oracle_terms": "12",
    # synth
    "synth_a": "0.00257",
    "synth_e": "0.0549",
    "synth_inclination_deg": "5.145",
    "synth_node_deg": "0",
    "synth_argp_deg": "0",
    "synth_mean_anomaly": "3.0",
    "synth_period_days": str(ANOMALISTIC_MONTH_DAYS),
    "synth_start": "2024-01-01T00:00:00",
    "synth_stop": "2025-01-01T00:00:00",
    "synth_step_minutes": "60",
    "synth_sigma_angle": "0",
    "synth_sigma_distance": "0",
    "synth_offset": "0,0,0",
    "synth_mu": "0.0123",
    "synth_file": "synth.csv",
    "truth_file": "synth_truth.json",
}

_SECTION = "run"

# Keys that change how a run executes but not what it computes; they are left
# out of the config hash so outputs match across worker counts and locations.
EXECUTION_KEYS = frozenset({"workers", "output_dir"})


# ------------------------------------------------------------------ config


class RunConfig:
    """Resolved key/value settings with typed accessors."""

    def __init__(self, values: dict[str, str], command: str):
        self.values = values
        self.command = command

    def __getitem__(self, key: str) -> str:
        return self.values[key]

    def text(self, key: str) -> str:
        return self.values[key].strip()

    def integer(self, key: str) -> int:
        try:
            return int(self.values[key])
        except ValueError:
            raise ConfigurationError(f"{key} must be an integer, got {self.values[key]!r}") from None

    def real(self, key: str) -> float:
        try:
            value = float(self.values[key])
        except ValueError:
            raise ConfigurationError(f"{key} must be a number, got {self.values[key]!r}") from None
        if not math.isfinite(value):
            raise ConfigurationError(f"{key} must be finite")
        return value

    def vector(self, key: str) -> tuple[float, float, float]:
        parts = [p for p in self.values[key].replace(" ", "").split(",") if p]
        if len(parts) != 3:
            raise ConfigurationError(f"{key} needs three comma-separated numbers")
        try:
            return tuple(float(p) for p in parts)  # type: ignore[return-value]
        except ValueError:
            raise ConfigurationError(f"{key} must hold numbers, got {self.values[key]!r}") from None

    def out(self, key: str) -> Path:
        return Path(self.text("output_dir")) / self.text(key)

    def content_items(self) -> list[tuple[str, str]]:
        return [(k, self.values[k]) for k in sorted(self.values) if k not in EXECUTION_KEYS]

    def digest(self) -> str:
        body = "\n".join(f"{k}={v}" for k, v in self.content_items())
        return hashlib.sha256(body.encode("utf-8")).hexdigest()

    def header(self) -> list[str]:
        return [f"eqcentre {__version__}", f"command {self.command}", f"config-sha256 {self.digest()}"]


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a flat ``key = value`` file."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(f"[{_SECTION}]\n" + path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    values = dict(parser[_SECTION])
    unknown = sorted(set(values) - set(DEFAULTS))
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {unknown}")
    return values


def resolve_config(command: str, config_path: str | None, overrides: dict[str, str]) -> RunConfig:
    """Defaults, then the file, then command-line overrides."""
    values = dict(DEFAULTS)
    if config_path:
        values.update(read_config_file(config_path))
    unknown = sorted(set(overrides) - set(DEFAULTS))
    if unknown:
        raise ConfigurationError(f"unknown keys {unknown}")
    values.update(overrides)
    return RunConfig(values, command)


def _existing(path_text: str, what: str) -> Path:
    path = Path(path_text)
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def _write_text(path: Path, cfg: RunConfig, lines: Sequence[str]) -> None:
    text = "".join(f"# {h}\n" for h in cfg.header()) + "".join(f"{line}\n" for line in lines)
    path.write_text(text, encoding="utf-8")


def _dataset_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


# ---------------------------------------------------------------- commands


def _load_records(cfg: RunConfig):
    source = cfg.text("input")
    target = cfg.text("fetch_target")
    if bool(source) == bool(target):
        raise ConfigurationError("give exactly one input source: input or fetch_target")
    if target:
        endpoint = cfg.text("fetch_endpoint")
        if not endpoint:
            raise ConfigurationError("fetch_endpoint is required when fetching")
        query = HorizonsQuery(
            target=target,
            center=cfg.text("fetch_center"),
            start=epoch_to_datetime(parse_epoch(cfg.text("fetch_start"))),
            stop=epoch_to_datetime(parse_epoch(cfg.text("fetch_stop"))),
            step_minutes=cfg.integer("fetch_step_minutes"),
        )
        return parse_horizons_text(fetch_horizons(query, endpoint, cfg.real("fetch_timeout")))
    path = _existing(source, "input file")
    fmt = cfg.text("input_format")
    if fmt == "auto":
        head = path.read_text(encoding="utf-8", errors="replace")
        fmt = "horizons" if "$$SOE" in head else "csv"
    if fmt == "horizons":
        return parse_horizons_text(path.read_text(encoding="utf-8", errors="replace"))
    if fmt != "csv":
        raise ConfigurationError(f"input_format must be auto, horizons or csv, got {fmt!r}")
    mapping = ColumnMapping(
        epoch=cfg.text("csv_epoch_column"),
        ra=cfg.text("csv_ra_column"),
        dec=cfg.text("csv_dec_column"),
        delta=cfg.text("csv_delta_column"),
        angles=cfg.text("csv_angles"),
    )
    return load_csv(path, mapping)


def cmd_ingest(cfg: RunConfig) -> int:
    records = _load_records(cfg)
    out = cfg.out("ephemeris_file")
    write_csv(records, out, cfg.header())
    first, last = epoch_to_datetime(records[0].epoch), epoch_to_datetime(records[-1].epoch)
    print(f"records {len(records)}")
    print(f"span {first.isoformat()} .. {last.isoformat()}")
    print(f"wrote {out}")
    return 0


def load_apsides(path: Path) -> list[ApsisEvent]:
    """Apsis events from a synth ground-truth sidecar (epochs plus a, e)."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        a, e = float(data["elements"]["a"]), float(data["elements"]["e"])
        times = data["apsides"]
        radius = {"perigee": a * (1.0 - e), "apogee": a * (1.0 + e)}
        events = [ApsisEvent(float(t), kind, radius[kind]) for kind in ("perigee", "apogee") for t in times[kind]]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: not a ground-truth sidecar ({exc})") from exc
    return sorted(events, key=lambda ev: ev.epoch)


def cmd_preprocess(cfg: RunConfig) -> int:
    source = cfg.text("ephemeris") or str(cfg.out("ephemeris_file"))
    records = load_csv(_existing(source, "ephemeris file"))
    apsides = None
    if cfg.text("apsides_file"):
        apsides = load_apsides(_existing(cfg.text("apsides_file"), "apsides file"))
    result = preprocess_records(
        records,
        coordinate_system=cfg.text("coordinate_system"),
        apsis_source=cfg.text("apsis_source"),
        window=cfg.integer("window"),
        apsides=apsides,
    )
    d = result.diagnostics
    result.table.to_csv(cfg.out("residuals_file"), cfg.header())
    result.basis.to_csv(Path(cfg.text("output_dir")) / "basis.csv", cfg.header())
    cycle_rows = ["cycle,start_epoch_s,perigee_epoch_s,end_epoch_s,duration_days,records,eccentricity_from_apsides"]
    for seg, e in zip(result.segments, d["eccentricity_from_apsides"]):
        cycle_rows.append(
            f"{seg.index},{_fmt(seg.start)},{_fmt(seg.perigee)},{_fmt(seg.end)},"
            f"{_fmt(seg.duration / DAY)},{len(seg)},{_fmt(e)}"
        )
    _write_text(Path(cfg.text("output_dir")) / "cycles.csv", cfg, cycle_rows)
    report = [
        f"records = {d['records']}",
        f"records_in_span = {d['records_in_span']}",
        f"records_in_cycles = {d['records_in_cycles']}",
        f"cycles = {d['cycles']}",
        f"cycle_durations_days = {', '.join(_fmt(v) for v in d['cycle_durations_days'])}",
        f"reconstruction_ratio = {_fmt(d['reconstruction_ratio'])}",
        f"eigenvalues = {', '.join(_fmt(v) for v in d['eigenvalues'])}",
        f"mean_eccentricity_from_apsides = {_fmt(np.mean(d['eccentricity_from_apsides']))}",
        f"kepler_path_max_discrepancy_rad = {_fmt(d['kepler_path_max_discrepancy_rad'])}",
        f"max_abs_residual_rad = {_fmt(d['max_abs_residual_rad'])}",
    ]
    _write_text(Path(cfg.text("output_dir")) / "preprocess_report.txt", cfg, report)
    print(f"cycles {d['cycles']}")
    print(f"records in cycles {d['records_in_cycles']} of {d['records']}")
    print(f"max |residual| {d['max_abs_residual_rad']:.6g} rad")
    return 0


def search_config(cfg: RunConfig) -> SearchConfig:
    """Preset from ``experiment`` with any explicit search keys applied on top."""
    base = experiment_preset(cfg.integer("experiment"))
    changes: dict = {}
    if cfg.text("vocabulary"):
        name = cfg.text("vocabulary").upper()
        if name not in VOCABULARIES:
            raise ConfigurationError(f"unknown vocabulary {name!r}; choose {sorted(VOCABULARIES)}")
        changes["vocabulary"] = VOCABULARIES[name]
    if cfg.text("inputs"):
        changes["inputs"] = tuple(s.strip() for s in cfg.text("inputs").split(",") if s.strip())
    if cfg.text("target"):
        changes["target"] = cfg.text("target")
    for key in ("max_nodes", "harmonics", "max_constants"):
        if cfg.text(key):
            changes[key] = cfg.integer(key)
    for key in ("fit_epsilon", "const_grain"):
        if cfg.text(key):
            changes[key] = cfg.real(key)
    if changes:
        changes["name"] = f"{base.name}+custom"
    return base.with_overrides(**changes)


def _search_lines(scfg: SearchConfig) -> list[str]:
    return [
        f"search = {scfg.name}",
        f"vocabulary = {scfg.vocabulary.name}",
        f"max_nodes = {scfg.max_nodes}",
        f"inputs = {', '.join(scfg.inputs)}",
        f"target = {scfg.target}",
        f"fit_epsilon = {_fmt(scfg.fit_epsilon)}",
        f"const_grain = {_fmt(scfg.const_grain)}",
        f"max_constants = {scfg.max_constants}",
    ]


def _eccentricity_lines(front) -> list[str]:
    best = first_harmonic_candidate(front)
    if best is None:
        return ["first_harmonic = none on frontier"]
    c = sin_coefficient(best.expression)
    lines = [f"first_harmonic = {best.prefix}", f"first_harmonic_coefficient = {_fmt(c)}"]
    try:
        lines.append(f"eccentricity = {_fmt(invert_c1(c))}")
    except ToolkitError as exc:
        lines.append(f"eccentricity = undefined ({exc})")
    return lines


def cmd_discover(cfg: RunConfig) -> int:
    source = _existing(cfg.text("residuals") or str(cfg.out("residuals_file")), "residual file")
    table = ResidualTable.from_csv(source)
    scfg = search_config(cfg)
    start = time.perf_counter()
    front = discover(table.columns(), scfg, workers=cfg.integer("workers"))
    elapsed = time.perf_counter() - start
    out = cfg.out("frontier_file")
    write_frontier(front, out, cfg.header())
    report = [f"dataset = {source.name}", f"dataset_sha256 = {_dataset_hash(source)}", f"rows = {len(table)}"]
    report += _search_lines(scfg) + [f"frontier_size = {len(front)}"] + _eccentricity_lines(front)
    report += ["", "config:"] + [f"  {k} = {v}" for k, v in cfg.content_items()]
    _write_text(out.with_name(out.stem + "_report.txt"), cfg, report)
    for line in _eccentricity_lines(front):
        print(line)
    print(f"frontier {len(front)} candidates -> {out}")
    print(f"runtime {elapsed:.1f} s")
    return 0


def _synth_spec(cfg: RunConfig) -> SynthSpec:
    start = parse_epoch(cfg.text("synth_start"))
    elements = OrbitalElements(
        a=cfg.real("synth_a"),
        e=cfg.real("synth_e"),
        inclination=math.radians(cfg.real("synth_inclination_deg")),
        node=math.radians(cfg.real("synth_node_deg")),
        argp=math.radians(cfg.real("synth_argp_deg")),
        mean_anomaly=cfg.real("synth_mean_anomaly"),
        period=cfg.real("synth_period_days") * DAY,
        epoch=start,
    )
    return SynthSpec(
        elements=elements,
        start=start,
        stop=parse_epoch(cfg.text("synth_stop")),
        step_minutes=cfg.integer("synth_step_minutes"),
        sigma_angle=cfg.real("synth_sigma_angle"),
        sigma_distance=cfg.real("synth_sigma_distance"),
        seed=cfg.integer("seed"),
        observer_offset=cfg.vector("synth_offset"),
    )


def parse_frame_list(text: str, axes: Sequence[str]) -> list[FrameSpec]:
    """``body:NAME``, ``barycentre:A+B[+C]`` or ``offset:NAME:x,y,z`` items, ``;``-separated."""
    frames = []
    for item in (s.strip() for s in text.split(";")):
        if not item:
            continue
        kind, _, rest = item.partition(":")
        for axis in axes:
            if kind == "body" and rest:
                frames.append(FrameSpec("body", (rest,), axes=axis))
            elif kind == "barycentre" and "+" in rest:
                frames.append(FrameSpec("barycentre", tuple(rest.split("+")), axes=axis))
            elif kind == "offset" and rest.count(":") == 1:
                body, vec = rest.split(":")
                try:
                    offset = tuple(float(v) for v in vec.split(","))
                except ValueError:
                    raise ConfigurationError(f"bad offset in frame {item!r}") from None
                if len(offset) != 3:
                    raise ConfigurationError(f"offset in frame {item!r} needs three numbers")
                frames.append(FrameSpec("offset", (body,), axes=axis, offset=offset))
            else:
                raise ConfigurationError(f"cannot parse frame {item!r}")
    if not frames:
        raise ConfigurationError("frames lists no frame")
    return frames


def _masses(text: str) -> dict[str, float]:
    out = {}
    for item in (s.strip() for s in text.split(",")):
        if item:
            name, _, value = item.partition(":")
            try:
                out[name.strip()] = float(value)
            except ValueError:
                raise ConfigurationError(f"bad mass entry {item!r}") from None
    return out


def _frame_tables(cfg: RunConfig) -> tuple[dict[str, FrameSeries], dict[str, float]]:
    source = cfg.text("frames_source")
    if source == "synth":
        mu = cfg.real("synth_mu")
        tables = two_body_positions(_synth_spec(cfg), mu)
        masses = {"primary": 1.0 - mu, "secondary": mu}
    elif source == "ephemeris":
        path = cfg.text("ephemeris") or str(cfg.out("ephemeris_file"))
        target = records_to_cartesian(load_csv(_existing(path, "ephemeris file")), cfg.text("coordinate_system"))
        tables = {
            "observer": FrameSeries(None, target.epochs, np.zeros_like(target.positions)),
            "target": FrameSeries(None, target.epochs, target.positions),
        }
        masses = {}
    else:
        raise ConfigurationError(f"frames_source must be synth or ephemeris, got {source!r}")
    masses.update(_masses(cfg.text("masses")))
    return tables, masses


def cmd_frames(cfg: RunConfig) -> int:
    axes = [a.strip() for a in cfg.text("frames_axes").split(",") if a.strip()]
    for axis in axes:
        if axis not in AXES_OPTIONS:
            raise ConfigurationError(f"unknown axes option {axis!r}")
    tables, masses = _frame_tables(cfg)
    catalog = FrameCatalog(tuple(parse_frame_list(cfg.text("frames"), axes)), tables, masses)
    scfg = search_config(cfg)
    start = time.perf_counter()
    result = run_catalog(
        catalog,
        cfg.text("frames_target"),
        scfg,
        apsis_source=cfg.text("apsis_source"),
        window=cfg.integer("window"),
        workers=cfg.integer("workers"),
    )
    elapsed = time.perf_counter() - start
    out_dir = Path(cfg.text("output_dir"))
    write_frontier(result.frontier, out_dir / "frames_frontier.csv", cfg.header())
    write_diagnostics(result.results, out_dir / "frames_diagnostics.csv", cfg.header())
    winner = result.winner()
    report = [f"frames = {len(catalog.frames)}"] + [f"frame = {t}" for t in catalog.tags]
    report += _search_lines(scfg)
    report += [f"winner_tag = {winner.frame_tag}", f"winner = {winner.prefix}"]
    report += _eccentricity_lines(result.frontier)
    _write_text(out_dir / "frames_report.txt", cfg, report)
    for r in result.results:
        print(f"{r.tag}: {r.diagnostics['status']} {r.diagnostics['reason']}".rstrip())
    print(f"winner {winner.frame_tag}: {winner.infix}")
    print(f"runtime {elapsed:.1f} s")
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    e = cfg.real("oracle_e")
    step = cfg.real("oracle_step")
    terms = cfg.integer("oracle_terms")
    if not step > 0:
        raise ConfigurationError("oracle_step must be positive")
    M = np.arange(0.0, 2.0 * math.pi + step / 2, step)
    M = M[M <= 2.0 * math.pi]
    exact = centre_exact(M, e)
    series = centre_bessel_series(e, M, terms, terms)
    first = centre_coefficient_c1(e) * np.sin(M)
    rows = ["M_rad,centre_exact,centre_series,first_order,series_minus_exact,first_order_minus_exact"]
    for row in zip(M, exact, series, first, series - exact, first - exact):
        rows.append(",".join(_fmt(v) for v in row))
    out = Path(cfg.text("output_dir")) / "oracle.csv"
    _write_text(out, cfg, rows)
    print(f"max |series - exact| {np.max(np.abs(series - exact)):.3g}")
    print(f"max |first order - exact| {np.max(np.abs(first - exact)):.3g}")
    print(f"wrote {out}")
    return 0


def cmd_synth(cfg: RunConfig) -> int:
    spec = _synth_spec(cfg)
    records = synth_dataset(spec)
    header = cfg.header() + [f"noise {NOISE_GENERATOR} seed {spec.seed}"]
    write_csv(records, cfg.out("synth_file"), header)
    write_ground_truth(spec, cfg.out("truth_file"), header)
    print(f"records {len(records)}")
    print(f"wrote {cfg.out('synth_file')} and {cfg.out('truth_file')}")
    return 0


HANDLERS = {
    "ingest": cmd_ingest,
    "preprocess": cmd_preprocess,
    "discover": cmd_discover,
    "frames": cmd_frames,
    "oracle": cmd_oracle,
    "synth": cmd_synth,
}


# ----------------------------------------------------------------- parsing


def _pair(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqcentre", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eqcentre {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "read a Horizons table or CSV (or fetch one) into the toolkit CSV",
        "preprocess": "plane fit, cycles and Equation-of-the-Centre residuals",
        "discover": "symbolic search for the residual under an experiment preset",
        "frames": "search across reference frames and merge the frontiers",
        "oracle": "exact versus Bessel-series Equation of the Centre on a grid",
        "synth": "synthetic two-body ephemeris with a ground-truth sidecar",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", "-c", help="flat key = value config file")
        p.add_argument("--set", "-s", action="append", type=_pair, default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--output-dir", "-o", dest="output_dir", help="directory for output files")
        p.add_argument("--seed", help="seed for synthetic noise")
        p.add_argument("--workers", help="worker processes for the search")
        if name == "ingest":
            p.add_argument("input", nargs="?", help="Horizons text or CSV file")
        if name in ("discover", "frames"):
            p.add_argument("--experiment", "-e", choices=["1", "2", "3"], help="experiment preset")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = dict(args.set)
    for key in ("output_dir", "seed", "workers", "input", "experiment"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    try:
        cfg = resolve_config(args.command, args.config, overrides)
        out_dir = Path(cfg.text("output_dir"))
        if not out_dir.is_dir():
            raise InputError(f"output directory does not exist: {out_dir}")
        return HANDLERS[args.command](cfg)
    except ToolkitError as exc:
        print(f"eqcentre {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"eqcentre {args.command}: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
