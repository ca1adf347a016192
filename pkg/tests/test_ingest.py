from __future__ import annotations

import math
import threading
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqcentre.errors import ConfigurationError, FormatError, TransportError, ValidationError
from eqcentre.ingest import (
    ColumnMapping,
    EphemerisRecord,
    HorizonsQuery,
    check_monotonic,
    dms_to_radians,
    epoch_to_datetime,
    fetch_horizons,
    format_dms,
    format_hms,
    hms_to_radians,
    load_csv,
    parse_dec,
    parse_epoch,
    parse_horizons_text,
    parse_ra,
    write_csv,
)

# (6, 2, 16.18) and (23, 26, 21.4) evaluated independently at 40 digits
HMS_6_2_16_18 = 1.5806996158589211
DMS_23_26_21_4 = 0.40909257151176200

HORIZONS_BODY = """\
*******************************************************************************
 Date__(UT)__HR:MN, , ,R.A._____(ICRF)_____DEC, ,delta,deltadot,
*******************************************************************************
$$SOE
 2024-Jan-01 00:00, , ,08 45 17.94,+21 36 33.6, 0.00271265917736, 0.0417,
 2024-Jan-01 01:00, , ,08 47 27.06,+21 24 09.4, 0.00271298911341, 0.0403,
 2024-Jan-01 02:00, , ,08 49 35.94,+21 11 38.1, 0.00271330917521, 0.0389,
$$EOE
*******************************************************************************
"""


def test_hms_examples():
    assert hms_to_radians(0, 0, 0.0) == 0.0
    assert hms_to_radians(12, 0, 0.0) == pytest.approx(math.pi, abs=1e-15)
    assert hms_to_radians(6, 2, 16.18) == pytest.approx(HMS_6_2_16_18, abs=1e-12)


def test_dms_examples():
    assert dms_to_radians(1, 0, 0, 0.0) == 0.0
    assert dms_to_radians(-1, 90, 0, 0.0) == pytest.approx(-math.pi / 2, abs=1e-15)
    assert dms_to_radians(1, 23, 26, 21.4) == pytest.approx(DMS_23_26_21_4, abs=1e-12)


@pytest.mark.parametrize("args", [(24, 0, 0.0), (-1, 0, 0.0), (1, 60, 0.0), (1, 0, 60.0)])
def test_hms_out_of_range(args):
    with pytest.raises(ValidationError):
        hms_to_radians(*args)


@pytest.mark.parametrize("args", [(1, 91, 0, 0.0), (1, 90, 0, 1.0), (1, 10, 60, 0.0), (-1, 10, 0, 60.0)])
def test_dms_out_of_range(args):
    with pytest.raises(ValidationError):
        dms_to_radians(*args)


def test_sexagesimal_forms_agree():
    assert parse_ra("06 02 16.18") == parse_ra("06:02:16.18")
    assert parse_dec("-05 07 30.0") == parse_dec("-05:07:30.0")
    assert parse_dec("-00 30 00.0") < 0


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=0.0, max_value=2 * math.pi, exclude_max=True))
def test_ra_hms_round_trip(ra):
    assert abs(parse_ra(format_hms(ra)) - ra) < 1e-9 or abs(abs(parse_ra(format_hms(ra)) - ra) - 2 * math.pi) < 1e-9


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=-math.pi / 2, max_value=math.pi / 2))
def test_dec_dms_round_trip(dec):
    assert parse_dec(format_dms(dec)) == pytest.approx(dec, abs=1e-9)


def test_parse_horizons_three_lines():
    records = parse_horizons_text(HORIZONS_BODY)
    assert len(records) == 3
    assert [r.epoch for r in records] == sorted(r.epoch for r in records)
    assert epoch_to_datetime(records[0].epoch) == datetime(2024, 1, 1, tzinfo=timezone.utc)
    assert records[1].epoch - records[0].epoch == 3600.0
    assert records[0].ra == pytest.approx(hms_to_radians(8, 45, 17.94), abs=1e-15)
    assert records[0].dec == pytest.approx(dms_to_radians(1, 21, 36, 33.6), abs=1e-15)
    assert records[0].delta == 0.00271265917736


def test_parse_horizons_sorts_out_of_order_lines():
    lines = HORIZONS_BODY.splitlines()
    soe = lines.index("$$SOE")
    lines[soe + 1], lines[soe + 3] = lines[soe + 3], lines[soe + 1]
    records = parse_horizons_text("\n".join(lines))
    assert [r.epoch for r in records] == sorted(r.epoch for r in records)


def test_parse_horizons_missing_sentinels():
    with pytest.raises(FormatError):
        parse_horizons_text(HORIZONS_BODY.replace("$$SOE", ""))
    with pytest.raises(FormatError):
        parse_horizons_text(HORIZONS_BODY.replace("$$EOE", ""))


def test_parse_horizons_malformed_line_names_line_number():
    bad = HORIZONS_BODY.replace("08 47 27.06", "garbage")
    with pytest.raises(FormatError, match="line 6"):
        parse_horizons_text(bad)


def test_parse_horizons_duplicate_epoch():
    lines = HORIZONS_BODY.splitlines()
    soe = lines.index("$$SOE")
    lines.insert(soe + 1, lines[soe + 1])
    with pytest.raises(ValidationError):
        parse_horizons_text("\n".join(lines))


def test_record_invariants():
    with pytest.raises(ValidationError):
        EphemerisRecord(0.0, 0.1, 0.1, -1.0)
    with pytest.raises(ValidationError):
        EphemerisRecord(0.0, 2 * math.pi, 0.1, 1.0)
    with pytest.raises(ValidationError):
        EphemerisRecord(0.0, 0.1, 2.0, 1.0)


def test_load_csv_radians(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("epoch_s,ra_rad,dec_rad,delta_au\n0,0.1,0.2,0.0025\n3600,0.2,0.1,0.0026\n")
    records = load_csv(path)
    assert len(records) == 2
    assert records[1].ra == 0.2


def test_load_csv_sexagesimal(tmp_path):
    path = tmp_path / "sex.csv"
    path.write_text("when,alpha,delta_deg,dist,extra\n2024-01-01 00:00,06 02 16.18,+23 26 21.4,0.0025,ignored\n")
    mapping = ColumnMapping(epoch="when", ra="alpha", dec="delta_deg", delta="dist", angles="sexagesimal")
    (record,) = load_csv(path, mapping)
    assert record.ra == pytest.approx(HMS_6_2_16_18, abs=1e-12)
    assert record.dec == pytest.approx(DMS_23_26_21_4, abs=1e-12)


def test_load_csv_errors(tmp_path):
    path = tmp_path / "neg.csv"
    path.write_text("epoch_s,ra_rad,dec_rad,delta_au\n0,0.1,0.2,-1\n")
    with pytest.raises(ValidationError):
        load_csv(path)
    with pytest.raises(ConfigurationError):
        load_csv(path, ColumnMapping(ra="nope"))
    bad = tmp_path / "bad.csv"
    bad.write_text("epoch_s,ra_rad,dec_rad,delta_au\n0,abc,0.2,1\n")
    with pytest.raises(FormatError, match="row 2"):
        load_csv(bad)


def test_csv_round_trip(tmp_path):
    records = parse_horizons_text(HORIZONS_BODY)
    path = tmp_path / "out.csv"
    write_csv(records, path, ["a comment"])
    text = path.read_text()
    assert text.startswith("# a comment\nepoch_s,ra_rad,dec_rad,delta_au\n")
    assert "\r" not in text
    assert load_csv(path) == records


record_lists = st.lists(
    st.tuples(
        st.integers(min_value=-10**9, max_value=10**9),
        st.floats(min_value=0.0, max_value=6.28),
        st.floats(min_value=-1.5, max_value=1.5),
        st.floats(min_value=1e-6, max_value=10.0),
    ),
    min_size=1,
    max_size=30,
    unique_by=lambda t: t[0],
)


@settings(max_examples=100, deadline=None)
@given(record_lists)
def test_csv_writer_reader_identity(tmp_path_factory, rows):
    records = tuple(sorted((EphemerisRecord(float(t), a, d, x) for t, a, d, x in rows), key=lambda r: r.epoch))
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    write_csv(records, path)
    assert load_csv(path) == records


@settings(max_examples=100, deadline=None)
@given(record_lists, st.randoms(use_true_random=False))
def test_shuffled_records_rejected_by_monotonic_check(rows, rnd):
    records = [EphemerisRecord(float(t), a, d, x) for t, a, d, x in rows]
    ordered = sorted(records, key=lambda r: r.epoch)
    check_monotonic(ordered)
    shuffled = ordered[:]
    rnd.shuffle(shuffled)
    if shuffled != ordered:
        with pytest.raises(ValidationError):
            check_monotonic(shuffled)


def test_parse_epoch_forms():
    assert parse_epoch("0") == 0.0
    assert parse_epoch("2000-01-01 12:00") == 0.0
    assert parse_epoch("2024-Jan-01 00:00") == parse_epoch("2024-01-01T00:00:00")
    with pytest.raises(FormatError):
        parse_epoch("yesterday")


def test_query_invariants():
    start = datetime(2024, 1, 1, tzinfo=timezone.utc)
    with pytest.raises(ValidationError):
        HorizonsQuery("301", "500@399", start, start, 60)
    with pytest.raises(ValidationError):
        HorizonsQuery("301", "500@399", start, datetime(2025, 1, 1, tzinfo=timezone.utc), 0)


class _Stub(BaseHTTPRequestHandler):
    status = 200
    body = HORIZONS_BODY
    seen: list[str] = []

    def do_GET(self):  # noqa: N802 - http.server naming
        type(self).seen.append(self.path)
        payload = type(self).body.encode()
        self.send_response(type(self).status)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _Stub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _Stub.status, _Stub.body, _Stub.seen = 200, HORIZONS_BODY, []
    yield f"http://127.0.0.1:{server.server_port}/api/horizons.api"
    server.shutdown()
    server.server_close()


def _query():
    return HorizonsQuery(
        "301", "500@399", datetime(2024, 1, 1, tzinfo=timezone.utc), datetime(2025, 1, 1, tzinfo=timezone.utc), 60
    )


def test_fetch_returns_body_verbatim(stub_server):
    body = fetch_horizons(_query(), stub_server, timeout=5)
    assert body == HORIZONS_BODY
    assert "COMMAND" in _Stub.seen[0]
    assert len(parse_horizons_text(body)) == 3


def test_fetch_http_error(stub_server):
    _Stub.status = 503
    with pytest.raises(TransportError):
        fetch_horizons(_query(), stub_server, timeout=5)


def test_fetch_empty_body(stub_server):
    _Stub.body = "  \n"
    with pytest.raises(TransportError):
        fetch_horizons(_query(), stub_server, timeout=5)


def test_fetch_unreachable():
    with pytest.raises(TransportError):
        fetch_horizons(_query(), "http://127.0.0.1:9/api", timeout=2)
