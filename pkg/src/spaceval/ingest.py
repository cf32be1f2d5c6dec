"""AFD archive client, issuance-time parsing and forecast-cycle pairing.

The archive is the Iowa Environmental Mesonet JSON API:

* ``GET {base}/api/1/nws/afos/list.json?pil=AFDXXX&date=YYYY-MM-DD`` lists
  the products issued on one UTC day (``{"data": [{"product_id": ...,
  "entered": ...}, ...]}``);
* ``GET {base}/api/1/nwstext/{product_id}`` returns the raw product text.

Every request goes through a transport object, so tests replay recorded
response bodies from a fixture directory instead of touching the network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from functools import lru_cache
from pathlib import Path
from typing import Protocol
from urllib.parse import urlencode

from .hierarchy import read_data

log = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://mesonet.agron.iastate.edu"


class IngestError(Exception):
    pass


class NoTimestampError(IngestError, ValueError):
    pass


class NetworkError(IngestError):
    pass


class TransientError(NetworkError):
    """A failure worth retrying (timeouts, 5xx, 429)."""


class MalformedResponseError(IngestError, ValueError):
    def __init__(self, message: str, payload: str = ""):
        excerpt = payload[:200]
        super().__init__(f"{message}; payload starts: {excerpt!r}" if payload else message)
        self.payload = payload


class FixtureMissingError(NetworkError):
    pass


class SchemaError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# ---------------------------------------------------------------------------
# Samples and stations
# ---------------------------------------------------------------------------


def format_utc(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_utc(value: str) -> datetime:
    dt = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass
class Sample:
    sample_id: str
    station: str
    issue_time: datetime
    forecast_id: str | None
    reference_text: str
    predicted_text: str | None = None
    # local issuance time with its UTC offset, when known from the header
    issue_local: str | None = None

    REQUIRED = ("sample_id", "station", "issue_time", "reference_text")

    @property
    def local_time(self) -> datetime:
        if self.issue_local:
            return datetime.fromisoformat(self.issue_local)
        return self.issue_time

    def to_dict(self) -> dict:
        d = {
            "sample_id": self.sample_id,
            "station": self.station,
            "issue_time": format_utc(self.issue_time),
            "forecast_id": self.forecast_id,
            "reference_text": self.reference_text,
        }
        if self.issue_local is not None:
            d["issue_local"] = self.issue_local
        if self.predicted_text is not None:
            d["predicted_text"] = self.predicted_text
        return d

    @classmethod
    def from_dict(cls, d: dict, line: int | None = None) -> Sample:
        if not isinstance(d, dict):
            raise SchemaError("sample record must be a JSON object", line)
        missing = [k for k in cls.REQUIRED if d.get(k) in (None, "")]
        if missing:
            raise SchemaError(f"missing required field(s): {', '.join(missing)}", line)
        try:
            issue = parse_utc(str(d["issue_time"]))
        except ValueError as exc:
            raise SchemaError(f"bad issue_time {d['issue_time']!r}: {exc}", line) from None
        return cls(
            sample_id=str(d["sample_id"]),
            station=str(d["station"]),
            issue_time=issue,
            forecast_id=d.get("forecast_id"),
            reference_text=str(d["reference_text"]),
            predicted_text=d.get("predicted_text"),
            issue_local=d.get("issue_local"),
        )


@dataclass(frozen=True)
class Station:
    office: str
    city: str
    state: str
    node: str


def parse_stations(text: str) -> dict[str, Station]:
    out: dict[str, Station] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split("|")]
        if len(parts) != 4:
            raise SchemaError("expected office|city|state|hierarchy_node", lineno)
        st = Station(*parts)
        if st.office in out:
            raise SchemaError(f"duplicate office {st.office!r}", lineno)
        out[st.office] = st
    return out


@lru_cache(maxsize=None)
def default_stations() -> dict[str, Station]:
    return parse_stations(read_data("stations.txt"))


# ---------------------------------------------------------------------------
# Issuance timestamps
# ---------------------------------------------------------------------------

TZ_OFFSETS = {
    "UTC": 0, "GMT": 0, "Z": 0,
    "EST": -5, "EDT": -4,
    "CST": -6, "CDT": -5,
    "MST": -7, "MDT": -6,
    "PST": -8, "PDT": -7,
    "AKST": -9, "AKDT": -8,
    "HST": -10, "HDT": -9,
    "AST": -4, "ADT": -3,
    "CHST": 10,
    "SST": -11,
}

_MONTHS = ("JAN", "FEB", "MAR", "APR", "MAY", "JUN", "JUL", "AUG", "SEP", "OCT", "NOV", "DEC")
_DAYS = ("MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN")

HEADER_RE = re.compile(
    r"^[ \t]*(?P<hm>\d{1,4})[ \t]+(?P<ampm>AM|PM)[ \t]+(?P<tz>[A-Za-z]{1,4})[ \t]+"
    r"(?P<dow>MON|TUE|WED|THU|FRI|SAT|SUN)[ \t]+(?P<mon>" + "|".join(_MONTHS) + r")[ \t]+"
    r"(?P<day>\d{1,2})[ \t]+(?P<year>\d{4})[ \t]*$",
    re.IGNORECASE | re.MULTILINE,
)


@dataclass(frozen=True)
class IssueHeader:
    local: datetime  # aware, fixed offset of the named zone
    zone: str

    @property
    def utc(self) -> datetime:
        return self.local.astimezone(timezone.utc)


def parse_issue_header(raw_text: str) -> IssueHeader:
    """Find the first ``HMM AM|PM ZONE Dow Mon D YYYY`` line in a product."""
    for m in HEADER_RE.finditer(raw_text):
        zone = m["tz"].upper()
        if zone not in TZ_OFFSETS:
            log.warning("unknown time zone %r in header line %r", zone, m.group(0).strip())
            continue
        hm = m["hm"]
        hour12, minute = (int(hm[:-2]), int(hm[-2:])) if len(hm) > 2 else (int(hm), 0)
        if not 1 <= hour12 <= 12 or minute > 59:
            continue
        hour = hour12 % 12 + (12 if m["ampm"].upper() == "PM" else 0)
        tz = timezone(timedelta(hours=TZ_OFFSETS[zone]), zone)
        try:
            local = datetime(
                int(m["year"]), _MONTHS.index(m["mon"].upper()) + 1, int(m["day"]), hour, minute, tzinfo=tz
            )
        except ValueError:
            continue
        if _DAYS[local.weekday()] != m["dow"].upper():
            log.warning("weekday %s does not match date in header %r", m["dow"], m.group(0).strip())
        return IssueHeader(local, zone)
    raise NoTimestampError("no issuance timestamp line found in product text")


def parse_issue_time(raw_text: str) -> datetime:
    """UTC issuance time from a raw AFD product."""
    return parse_issue_header(raw_text).utc


def format_issue_header(instant: datetime, zone: str) -> str:
    """Render ``instant`` as an AFD header line in ``zone``."""
    zone = zone.upper()
    local = instant.astimezone(timezone(timedelta(hours=TZ_OFFSETS[zone])))
    hour12 = local.hour % 12 or 12
    ampm = "AM" if local.hour < 12 else "PM"
    label = "ChST" if zone == "CHST" else zone
    return (
        f"{hour12}{local.minute:02d} {ampm} {label} {_DAYS[local.weekday()].title()} "
        f"{_MONTHS[local.month - 1].title()} {local.day} {local.year}"
    )


# ---------------------------------------------------------------------------
# Forecast cycles
# ---------------------------------------------------------------------------

CYCLE_HOURS = (0, 6, 12, 18)
PAIRING_WINDOW = timedelta(hours=12)


def cycle_time(forecast_id: str) -> datetime:
    """Inverse of the ``YYYYMMDDHH`` forecast id format."""
    dt = datetime.strptime(forecast_id, "%Y%m%d%H").replace(tzinfo=timezone.utc)
    if dt.hour not in CYCLE_HOURS:
        raise ValueError(f"{forecast_id!r} is not a 00/06/12/18Z cycle")
    return dt


def pair_to_cycle(issue_time: datetime) -> str | None:
    """Nearest 6-hourly cycle as ``YYYYMMDDHH``; ties go to the earlier cycle."""
    t = issue_time.astimezone(timezone.utc)
    midnight = t.replace(hour=0, minute=0, second=0, microsecond=0)
    step = timedelta(hours=6)
    q, r = divmod(t - midnight, step)
    cycle = midnight + q * step + (step if r > step / 2 else timedelta(0))
    if abs(t - cycle) > PAIRING_WINDOW:
        return None
    return cycle.strftime("%Y%m%d%H")


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


def request_key(url: str, params: dict | None = None) -> str:
    if params:
        return f"{url}?{urlencode(sorted(params.items()))}"
    return url


class Transport(Protocol):
    def get(self, url: str, params: dict | None = None) -> str: ...


class HttpTransport:
    def __init__(self, timeout: float = 60.0, session=None):
        import requests

        self._requests = requests
        self.session = session or requests.Session()
        self.timeout = timeout

    def get(self, url: str, params: dict | None = None) -> str:
        req = self._requests
        try:
            resp = self.session.get(url, params=params, timeout=self.timeout)
        except (req.ConnectionError, req.Timeout) as exc:
            raise TransientError(f"GET {request_key(url, params)} failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"GET {request_key(url, params)} returned HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise NetworkError(f"GET {request_key(url, params)} returned HTTP {resp.status_code}")
        return resp.text


class ReplayTransport:
    """Serves recorded bodies from ``fixture_dir/index.json``."""

    def __init__(self, fixture_dir: str | Path):
        self.root = Path(fixture_dir)
        index = self.root / "index.json"
        self.index: dict[str, str] = json.loads(index.read_text()) if index.exists() else {}

    def get(self, url: str, params: dict | None = None) -> str:
        key = request_key(url, params)
        name = self.index.get(key)
        if name is None:
            raise FixtureMissingError(f"no recorded response for {key}")
        return (self.root / name).read_text(encoding="utf-8")


class RecordingTransport:
    """Passes requests to ``inner`` and stores each body verbatim."""

    def __init__(self, inner: Transport, fixture_dir: str | Path):
        self.inner = inner
        self.root = Path(fixture_dir)
        self.root.mkdir(parents=True, exist_ok=True)
        self._index_path = self.root / "index.json"
        self.index: dict[str, str] = json.loads(self._index_path.read_text()) if self._index_path.exists() else {}
        self._lock = threading.Lock()

    def get(self, url: str, params: dict | None = None) -> str:
        body = self.inner.get(url, params)
        key = request_key(url, params)
        name = hashlib.sha1(key.encode()).hexdigest()[:16] + ".body"
        with self._lock:
            (self.root / name).write_text(body, encoding="utf-8")
            self.index[key] = name
            self._index_path.write_text(json.dumps(self.index, indent=1, sort_keys=True) + "\n")
        return body


class RateLimiter:
    """Global minimum spacing between requests, shared across threads."""

    def __init__(self, per_second: float | None, clock=time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / per_second if per_second else 0.0
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def wait(self) -> None:
        if not self.interval:
            return
        with self._lock:
            now = self._clock()
            at = max(now, self._next)
            self._next = at + self.interval
        if at > now:
            self._sleep(at - now)


# ---------------------------------------------------------------------------
# Client
# ---------------------------------------------------------------------------


@dataclass
class AfdArchiveClient:
    endpoint: str = DEFAULT_ENDPOINT
    transport: Transport = field(default_factory=HttpTransport)
    max_retries: int = 4
    backoff: float = 0.5
    max_backoff: float = 30.0
    requests_per_second: float | None = None
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        self.endpoint = self.endpoint.rstrip("/")
        self._limiter = RateLimiter(self.requests_per_second, sleep=self.sleep)

    def _get(self, url: str, params: dict | None = None) -> str:
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            self._limiter.wait()
            try:
                return self.transport.get(url, params)
            except TransientError as exc:
                if attempt == self.max_retries:
                    raise NetworkError(f"giving up after {attempt + 1} attempts: {exc}") from exc
                log.info("transient failure (%s); retrying in %.2fs", exc, delay)
                self.sleep(delay)
                delay = min(delay * 2, self.max_backoff)
        raise AssertionError("unreachable")

    def list_products(self, station: str, day: date) -> list[dict]:
        body = self._get(f"{self.endpoint}/api/1/nws/afos/list.json", {"pil": f"AFD{station}", "date": day.isoformat()})
        try:
            payload = json.loads(body)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"listing for {station} {day} is not JSON ({exc})", body) from None
        rows = payload.get("data") if isinstance(payload, dict) else None
        if not isinstance(rows, list) or not all(isinstance(r, dict) and "product_id" in r for r in rows):
            raise MalformedResponseError(f"listing for {station} {day} lacks a data[].product_id array", body)
        return rows

    def fetch_text(self, product_id: str) -> str:
        return self._get(f"{self.endpoint}/api/1/nwstext/{product_id}")

    def fetch_afds(self, station: str, start: date, end: date) -> list[str]:
        """Raw AFD texts for ``station`` issued on UTC days ``start``..``end`` inclusive."""
        rows: dict[str, str] = {}
        day = start
        while day <= end:
            for row in self.list_products(station, day):
                rows.setdefault(row["product_id"], str(row.get("entered", "")))
            day += timedelta(days=1)
        ordered = sorted(rows, key=lambda pid: (rows[pid], pid))
        return [self.fetch_text(pid) for pid in ordered]

    def fetch_many(self, stations: Sequence[str], start: date, end: date, workers: int = 1) -> dict[str, list[str]]:
        if workers <= 1:
            return {st: self.fetch_afds(st, start, end) for st in stations}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = pool.map(lambda st: self.fetch_afds(st, start, end), stations)
            return dict(zip(stations, results))


def samples_from_products(station: str, texts: Iterable[str]) -> list[Sample]:
    """Turn raw products into samples; products without a header are logged and skipped."""
    out = []
    for raw in texts:
        try:
            header = parse_issue_header(raw)
        except NoTimestampError:
            log.warning("%s: skipping product without an issuance line: %r", station, raw[:80])
            continue
        issued = header.utc
        out.append(
            Sample(
                sample_id=f"{station}-{issued:%Y%m%d%H%M}",
                station=station,
                issue_time=issued,
                forecast_id=pair_to_cycle(issued),
                reference_text=raw,
                issue_local=header.local.isoformat(),
            )
        )
    return out
