import json
from datetime import date, datetime, timedelta, timezone

import pytest
from hypothesis import given
from hypothesis import strategies as st

from spaceval.ingest import (
    TZ_OFFSETS,
    AfdArchiveClient,
    FixtureMissingError,
    MalformedResponseError,
    NetworkError,
    NoTimestampError,
    RateLimiter,
    RecordingTransport,
    ReplayTransport,
    Sample,
    SchemaError,
    TransientError,
    cycle_time,
    default_stations,
    format_issue_header,
    pair_to_cycle,
    parse_issue_header,
    parse_issue_time,
    samples_from_products,
)
from spaceval.synth import FIXTURE_DAYS, FIXTURE_START, FIXTURE_STATIONS, Product, SyntheticArchive

UTC = timezone.utc
FIXTURE_END = FIXTURE_START + timedelta(days=FIXTURE_DAYS - 1)


def utc(*a):
    return datetime(*a, tzinfo=UTC)


@pytest.mark.parametrize(
    "line,expected",
    [
        ("330 PM MST Tue Jan 7 2025", utc(2025, 1, 7, 22, 30)),
        ("1200 AM EST Wed Jan 8 2025", utc(2025, 1, 8, 5, 0)),
        ("1200 PM EST Wed Jan 8 2025", utc(2025, 1, 8, 17, 0)),
        ("915 am hst thu jul 3 2025", utc(2025, 7, 3, 19, 15)),
        ("1045 PM ChST Fri Mar 7 2025", utc(2025, 3, 7, 12, 45)),
    ],
)
def test_parse_issue_time(line, expected):
    raw = f"000\nFXUS65 KBOU 072230\nAFDBOU\n\nArea Forecast Discussion\n{line}\n\n.SYNOPSIS...\n"
    assert parse_issue_time(raw) == expected


def test_no_header():
    with pytest.raises(NoTimestampError):
        parse_issue_time("FXUS65 KBOU 071500\nno time here\n")


def test_header_inside_prose_not_matched():
    with pytest.raises(NoTimestampError):
        parse_issue_time("Issued at 330 PM MST Tue Jan 7 2025 by the office\n")


def test_local_time_kept():
    h = parse_issue_header("330 PM MST Tue Jan 7 2025\n")
    assert h.zone == "MST"
    assert h.local.utcoffset() == timedelta(hours=-7)
    assert (h.local.hour, h.local.weekday()) == (15, 1)


@given(
    st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2099, 12, 31)).map(
        lambda d: d.replace(second=0, microsecond=0, tzinfo=UTC)
    ),
    st.sampled_from(sorted(TZ_OFFSETS)),
    st.booleans(),
)
def test_header_round_trip(instant, zone, upper):
    line = format_issue_header(instant, zone)
    if upper:
        line = line.upper()
    assert parse_issue_time(f"header\n{line}\nbody\n") == instant


@pytest.mark.parametrize(
    "t,fid",
    [
        (utc(2025, 1, 7, 5, 30), "2025010706"),
        (utc(2025, 1, 7, 3, 0), "2025010700"),
        (utc(2025, 1, 7, 21, 0), "2025010718"),
        (utc(2025, 1, 7, 23, 59), "2025010800"),
        (utc(2025, 12, 31, 22, 0), "2026010100"),
    ],
)
def test_pair_to_cycle(t, fid):
    assert pair_to_cycle(t) == fid


@given(st.datetimes(min_value=datetime(2000, 1, 1), max_value=datetime(2099, 12, 30)).map(lambda d: d.replace(tzinfo=UTC)))
def test_pair_to_cycle_nearest(t):
    fid = pair_to_cycle(t)
    assert abs(cycle_time(fid) - t) <= timedelta(hours=3)


def test_cycle_time_rejects_off_cycle():
    with pytest.raises(ValueError):
        cycle_time("2025010705")


def test_station_registry():
    stations = default_stations()
    assert len(stations) == 117
    assert stations["BOU"].node == "denver-co"
    assert stations["TWC"].node == "tucson-az"


def test_sample_round_trip():
    s = Sample("BOU-1", "BOU", utc(2025, 1, 7, 22, 30), "2025010800", "text", issue_local="2025-01-07T15:30:00-07:00")
    d = json.loads(json.dumps(s.to_dict()))
    assert Sample.from_dict(d) == s
    assert s.local_time.weekday() == 1


def test_sample_schema_error():
    with pytest.raises(SchemaError) as exc:
        Sample.from_dict({"sample_id": "x", "station": "BOU"}, line=4)
    assert exc.value.line == 4
    assert "reference_text" in str(exc.value)


# ---------------------------------------------------------------------------
# archive client (offline)
# ---------------------------------------------------------------------------


def test_replay_bundled_fixtures(data_dir):
    client = AfdArchiveClient(transport=ReplayTransport(data_dir / "archive"))
    texts = client.fetch_many(FIXTURE_STATIONS, FIXTURE_START, FIXTURE_END)
    samples = [s for st_ in FIXTURE_STATIONS for s in samples_from_products(st_, texts[st_])]
    assert len(samples) == 54
    for office in FIXTURE_STATIONS:
        times = [s.issue_time for s in samples if s.station == office]
        assert times == sorted(times) and len(times) == 9
    assert all(s.forecast_id == pair_to_cycle(s.issue_time) for s in samples)


def test_replay_missing_key(data_dir):
    client = AfdArchiveClient(transport=ReplayTransport(data_dir / "archive"))
    with pytest.raises(FixtureMissingError):
        client.fetch_afds("BOU", date(2020, 1, 1), date(2020, 1, 1))


def _products(n):
    base = utc(2025, 1, 7, 3, 0)
    out = []
    for i in range(n):
        t = base + timedelta(hours=6 * i)
        line = format_issue_header(t, "MST")
        out.append(Product(f"{t:%Y%m%d%H%M}-KBOU-AFDBOU", "BOU", t, f"AFDBOU\n{line}\nbody {i}\n"))
    return out


def test_three_products():
    client = AfdArchiveClient(transport=SyntheticArchive(_products(3)))
    texts = client.fetch_afds("BOU", date(2025, 1, 7), date(2025, 1, 7))
    assert [t.splitlines()[-1] for t in texts] == ["body 0", "body 1", "body 2"]


def test_empty_range():
    client = AfdArchiveClient(transport=SyntheticArchive(_products(3)))
    assert client.fetch_afds("BOU", date(2024, 1, 1), date(2024, 1, 3)) == []
    assert client.fetch_afds("BOU", date(2025, 1, 8), date(2025, 1, 7)) == []


class Scripted:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def get(self, url, params=None):
        self.calls += 1
        r = self.responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def test_malformed_listing():
    client = AfdArchiveClient(transport=Scripted(["<html>oops</html>"]))
    with pytest.raises(MalformedResponseError) as exc:
        client.list_products("BOU", date(2025, 1, 7))
    assert "<html>" in exc.value.payload


def test_listing_without_data_array():
    client = AfdArchiveClient(transport=Scripted(['{"rows": []}']))
    with pytest.raises(MalformedResponseError):
        client.list_products("BOU", date(2025, 1, 7))


def test_retry_then_success():
    sleeps = []
    t = Scripted([TransientError("503"), TransientError("429"), '{"data": []}'])
    client = AfdArchiveClient(transport=t, backoff=0.5, sleep=sleeps.append)
    assert client.list_products("BOU", date(2025, 1, 7)) == []
    assert t.calls == 3
    assert sleeps == [0.5, 1.0]


def test_retry_exhausted():
    sleeps = []
    t = Scripted([TransientError("503")] * 10)
    client = AfdArchiveClient(transport=t, max_retries=3, backoff=20, max_backoff=30, sleep=sleeps.append)
    with pytest.raises(NetworkError, match="4 attempts"):
        client.fetch_text("x")
    assert sleeps == [20, 30, 30]


def test_permanent_error_not_retried():
    t = Scripted([NetworkError("404")])
    client = AfdArchiveClient(transport=t, sleep=lambda s: None)
    with pytest.raises(NetworkError):
        client.fetch_text("x")
    assert t.calls == 1


def test_record_then_replay(tmp_path):
    products = _products(4)
    live = AfdArchiveClient(transport=RecordingTransport(SyntheticArchive(products), tmp_path))
    recorded = live.fetch_afds("BOU", date(2025, 1, 7), date(2025, 1, 7))
    replayed = AfdArchiveClient(transport=ReplayTransport(tmp_path)).fetch_afds("BOU", date(2025, 1, 7), date(2025, 1, 7))
    assert recorded == replayed and len(recorded) == 4


def test_samples_skip_headerless(caplog):
    texts = [p.text for p in _products(2)] + ["no header at all"]
    samples = samples_from_products("BOU", texts)
    assert len(samples) == 2
    assert samples[0].sample_id == "BOU-202501070300"
    assert "skipping" in caplog.text


def test_rate_limiter():
    now = [0.0]
    slept = []

    def sleep(s):
        slept.append(s)
        now[0] += s

    lim = RateLimiter(4, clock=lambda: now[0], sleep=sleep)
    for _ in range(3):
        lim.wait()
    assert slept == [0.25, 0.25]
    assert RateLimiter(None).interval == 0.0
