"""Deterministic synthetic AFD products, archive fixtures and scoring corpora.

Everything here is driven by a seeded ``random.Random`` so the bundled test
data can be regenerated exactly.  The text is templated, not realistic prose,
but it exercises the same code paths as real discussions: section headers,
``&&``/``$$`` separators, model and shortwave mentions, weekday references
and lead-time phrases.
"""

from __future__ import annotations

import json
import random
from collections.abc import Sequence
from dataclasses import dataclass, replace
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from urllib.parse import urlparse

from .hierarchy import LocationHierarchy, default_hierarchy
from .ingest import (
    DEFAULT_ENDPOINT,
    AfdArchiveClient,
    NetworkError,
    RecordingTransport,
    Sample,
    Station,
    default_stations,
    format_issue_header,
    pair_to_cycle,
)

# ---------------------------------------------------------------------------
# Time zones
# ---------------------------------------------------------------------------

_ZONE_STATES = {
    "E": "CT DE DC FL GA IN KY ME MD MA MI NH NJ NY NC OH PA RI SC VT VA WV",
    "C": "AL AR IL IA KS LA MN MS MO NE ND OK SD TN TX WI",
    "M": "AZ CO ID MT NM UT WY",
    "P": "CA NV OR WA",
    "H": "HI",
}
_STATE_ZONE = {st: z for z, states in _ZONE_STATES.items() for st in states.split()}
_OFFICE_ZONE = {"EPZ": "M", "GLD": "M", "UNR": "M", "PAH": "C", "MEG": "C", "OHX": "C", "TAE": "E"}
_ZONE_NAMES = {"E": ("EST", "EDT"), "C": ("CST", "CDT"), "M": ("MST", "MDT"), "P": ("PST", "PDT"), "H": ("HST", None)}


def _nth_sunday(year: int, month: int, n: int) -> date:
    d = date(year, month, 1)
    d += timedelta(days=(6 - d.weekday()) % 7)
    return d + timedelta(weeks=n - 1)


def station_zone(station: Station, instant: datetime) -> str:
    """Header zone abbreviation for ``station`` at ``instant`` (US DST rules, by date)."""
    zone = _OFFICE_ZONE.get(station.office) or _STATE_ZONE.get(station.state, "C")
    std, dst = _ZONE_NAMES[zone]
    if dst is None or station.state == "AZ":
        return std
    day = instant.date()
    if _nth_sunday(day.year, 3, 2) <= day < _nth_sunday(day.year, 11, 1):
        return dst
    return std


# ---------------------------------------------------------------------------
# Sentence specs
# ---------------------------------------------------------------------------

# phrase families: each has phase-specific phrases and templates that fit them
FAMILIES = {
    "pressure": (
        {
            "H": ("high pressure", "an upper level ridge", "a broad ridge", "strong high pressure"),
            "L": ("low pressure", "an upper trough", "a deep trough", "a broad area of low pressure"),
        },
        (
            "{p} will build over {loc} {t}.",
            "{p} shifts east across {loc} {t}.",
            "{p} remains in place over {loc} {t}, keeping conditions {cond}.",
            "{p} over {loc} will move toward {loc2} {t}.",
            "{p} will dominate the pattern {t}.",
        ),
    ),
    "front": (
        {"H": ("a warm front",), "L": ("a cold front",)},
        ("{p} will push through {loc} {t}.", "{p} lifts across {loc} {t}.", "{p} will cross the area {t}."),
    ),
    "anomaly": (
        {
            "H": ("warmer than normal temperatures", "above average temperatures"),
            "L": ("cooler than normal temperatures", "below average temperatures"),
        },
        ("{p} are expected across {loc} {t}.", "{p} spread into {loc} {t}.", "{p} settle over the area {t}."),
    ),
}
_TIMES = ("tonight", "this afternoon", "through tomorrow", "over the next day or so", "by early tomorrow")
_CONDITIONS = ("dry", "mild", "breezy", "unsettled", "quiet", "cool")
_FILLER = (
    "Winds will remain light and variable tonight.",
    "Skies stay mostly clear with dry conditions through the evening.",
    "Patchy fog may develop in sheltered valleys near sunrise.",
    "Humidity values stay low during the afternoon hours.",
    "Precipitation chances remain near zero for most locations.",
    "Overnight lows fall into the teens and twenties in the colder spots.",
)


@dataclass(frozen=True)
class Mention:
    """One templated phenomenon sentence."""

    family: str
    phase: str
    phrase: str
    template: str
    locations: tuple[str, ...]  # surface aliases, in template order
    time: str
    cond: str

    def render(self) -> str:
        loc = self.locations[0] if self.locations else "the region"
        loc2 = self.locations[1] if len(self.locations) > 1 else loc
        s = self.template.format(p=self.phrase, loc=loc, loc2=loc2, t=self.time, cond=self.cond)
        return s[0].upper() + s[1:]


class Geography:
    """Alias pools near to and far from each station's home node."""

    def __init__(self, hierarchy: LocationHierarchy):
        self.h = hierarchy
        self._named = [nid for nid in hierarchy.ids if hierarchy[nid].aliases and nid not in hierarchy.stop_set]

    def name(self, nid: str) -> str:
        return self.h[nid].aliases[0]

    def near(self, node: str) -> list[str]:
        anc = sorted(a for a in self.h.ancestors(node) if a not in self.h.stop_set)
        return [node, *anc]

    def far(self, node: str) -> list[str]:
        row = self.h.related_matrix[self.h.index(node)]
        return [n for n in self._named if not row[self.h.index(n)] and self.h[n].scale.value != "S"]


def make_mention(rng: random.Random, geo: Geography, node: str) -> Mention:
    family = rng.choice(("pressure", "pressure", "front", "anomaly"))
    phrases, templates = FAMILIES[family]
    phase = rng.choice("HL")
    template = rng.choice(templates)
    near = geo.near(node)
    n_locs = 2 if "{loc2}" in template else int("{loc}" in template)
    locs = tuple(geo.name(rng.choice(near)) for _ in range(n_locs))
    return Mention(family, phase, rng.choice(phrases[phase]), template, locs, rng.choice(_TIMES), rng.choice(_CONDITIONS))


def flip(m: Mention, rng: random.Random) -> Mention:
    phase = "L" if m.phase == "H" else "H"
    return replace(m, phase=phase, phrase=rng.choice(FAMILIES[m.family][0][phase]))


def relocate(m: Mention, rng: random.Random, geo: Geography, node: str) -> Mention:
    if not m.locations:
        return m
    far = geo.far(node)
    return replace(m, locations=tuple(geo.name(rng.choice(far)) for _ in m.locations))


# ---------------------------------------------------------------------------
# Raw AFD products
# ---------------------------------------------------------------------------

_WEEKDAY_NAMES = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")
_MODELS = ("ECMWF", "NAM", "HRRR", "CMC", "EURO", "UKMET", "SREF", "HREF", "ICON", "GEM", "RAP", "ECCC")
_SUBSYNOPTIC = (
    "A shortwave trough will cross {loc} {t}, bringing a few flurries.",
    "A weak sfc trough lingers along the lee of the terrain {t}.",
    "Surface high pressure noses into {loc} {t}.",
    "A surface low develops over {loc} {t}.",
    "Short-wave ridging moves overhead {t}.",
)


def _day_phrase(local: datetime, offset: int) -> str:
    return _WEEKDAY_NAMES[(local.weekday() + offset) % 7]


def raw_afd(station: Station, issue: datetime, rng: random.Random, geo: Geography, *, upper_header: bool = False) -> str:
    """One synthetic raw AFD product for ``station`` issued at UTC ``issue``."""
    zone = station_zone(station, issue)
    header = format_issue_header(issue, zone)
    if upper_header:
        header = header.upper()
    local_day = datetime.strptime(" ".join(header.split()[3:]), "%a %b %d %Y")

    def mention(day_offset: int | None = None) -> str:
        m = make_mention(rng, geo, station.node)
        if day_offset is not None:
            m = replace(m, time=f"on {_day_phrase(local_day, day_offset)}")
        return m.render()

    synopsis = [mention() for _ in range(rng.randint(1, 2))]
    short = [mention() for _ in range(rng.randint(2, 3))]
    short.insert(rng.randint(0, len(short)), mention(day_offset=rng.choice((1, 2))))
    if rng.random() < 0.5:
        loc = geo.name(rng.choice(geo.near(station.node)))
        short.insert(rng.randint(0, len(short)), f"The {rng.choice(_MODELS)} shows a deeper trough over {loc} than other guidance.")
    if rng.random() < 0.5:
        loc = geo.name(rng.choice(geo.near(station.node)))
        short.insert(rng.randint(0, len(short)), rng.choice(_SUBSYNOPTIC).format(loc=loc, t=rng.choice(_TIMES)))
    if rng.random() < 0.1:
        short.append("By Day 3 a trough may approach from the west.")
    short += rng.sample(_FILLER, 2)

    long_term = [mention(day_offset=rng.randint(3, 6)) for _ in range(rng.randint(2, 3))]
    if rng.random() < 0.3:
        long_term.append("The extended period looks drier as a ridge takes hold.")

    d2 = _day_phrase(local_day, 2).upper()
    d3, d7 = _day_phrase(local_day, 3).upper(), _day_phrase(local_day, 7).upper()
    prefix = f"{issue:%Y%m%d%H%M}"
    return "\n".join(
        [
            "000",
            f"FXUS6{rng.randint(1, 6)} K{station.office} {issue:%d%H%M}",
            f"AFD{station.office}",
            "",
            "Area Forecast Discussion",
            f"National Weather Service {station.city} {station.state}",
            header,
            "",
            ".SYNOPSIS...",
            _wrap(" ".join(synopsis)),
            "",
            "&&",
            "",
            f".SHORT TERM /THROUGH {d2}/...",
            f"Issued at {header}",
            "",
            _wrap(" ".join(short)),
            "",
            f".LONG TERM /{d3} THROUGH {d7}/...",
            _wrap(" ".join(long_term)),
            "",
            "&&",
            "",
            ".AVIATION /00Z TAFS/...",
            "VFR conditions will prevail through the period.",
            "",
            "&&",
            "",
            "$$",
            "",
            f"SHORT TERM...Forecaster {prefix[-3:]}",
            "",
        ]
    )


def _wrap(text: str, width: int = 68) -> str:
    lines, cur = [], ""
    for word in text.split():
        if cur and len(cur) + 1 + len(word) > width:
            lines.append(cur)
            cur = word
        else:
            cur = f"{cur} {word}" if cur else word
    if cur:
        lines.append(cur)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Archive fixtures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Product:
    product_id: str
    station: str
    entered: datetime
    text: str


class SyntheticArchive:
    """In-memory transport answering the archive's listing and text endpoints."""

    def __init__(self, products: Sequence[Product]):
        self.products = {p.product_id: p for p in products}

    def get(self, url: str, params: dict | None = None) -> str:
        path = urlparse(url).path
        if path.endswith("/api/1/nws/afos/list.json"):
            params = params or {}
            station = str(params.get("pil", ""))[3:]
            day = str(params.get("date", ""))
            rows = [
                {
                    "entered": p.entered.strftime("%Y-%m-%d %H:%M"),
                    "pil": f"AFD{p.station}",
                    "product_id": p.product_id,
                    "cccc": f"K{p.station}",
                }
                for p in self.products.values()
                if p.station == station and p.entered.date().isoformat() == day
            ]
            # listing order is not guaranteed chronological
            rows.sort(key=lambda r: r["product_id"], reverse=True)
            return json.dumps({"data": rows})
        prefix = "/api/1/nwstext/"
        if prefix in path:
            pid = path.split(prefix, 1)[1]
            if pid in self.products:
                return self.products[pid].text
        raise NetworkError(f"HTTP 404 for {url}")


FIXTURE_STATIONS = ("BOU", "TWC", "CAE", "OKX", "SEW", "LOT")
FIXTURE_START = date(2025, 1, 6)
FIXTURE_DAYS = 3


def fixture_products(seed: int = 7) -> list[Product]:
    """Products behind the bundled archive fixture (3 per station-day plus one headerless)."""
    rng = random.Random(seed)
    geo = Geography(default_hierarchy())
    stations = default_stations()
    out = []
    for office in FIXTURE_STATIONS:
        st = stations[office]
        for d in range(FIXTURE_DAYS):
            day = FIXTURE_START + timedelta(days=d)
            for hour in (3, 10, 21):
                issue = datetime(day.year, day.month, day.day, hour, rng.randint(0, 59), tzinfo=timezone.utc)
                text = raw_afd(st, issue, rng, geo, upper_header=rng.random() < 0.3)
                pid = f"{issue:%Y%m%d%H%M}-K{office}-FXUS6{d + 1}-AFD{office}"
                out.append(Product(pid, office, issue, text))
    broken = datetime(2025, 1, 7, 15, 0, tzinfo=timezone.utc)
    out.append(
        Product(
            f"{broken:%Y%m%d%H%M}-KBOU-FXUS65-AFDBOU",
            "BOU",
            broken,
            "000\nFXUS65 KBOU 071500\nAFDBOU\n\nCorrected product with a garbled header line.\n",
        )
    )
    return out


def build_archive_fixtures(out_dir: str | Path, seed: int = 7) -> int:
    """Record the synthetic archive into ``out_dir``; returns the product count."""
    products = fixture_products(seed)
    recorder = RecordingTransport(SyntheticArchive(products), out_dir)
    client = AfdArchiveClient(DEFAULT_ENDPOINT, recorder)
    end = FIXTURE_START + timedelta(days=FIXTURE_DAYS - 1)
    client.fetch_many(FIXTURE_STATIONS, FIXTURE_START, end)
    return len(products)


# ---------------------------------------------------------------------------
# Scoring corpus
# ---------------------------------------------------------------------------


def _text(mentions: Sequence[Mention]) -> str:
    return " ".join(m.render() for m in mentions)


def synthetic_corpus(
    n_samples: int = 200,
    stations_per_forecast: int = 8,
    seed: int = 0,
    hierarchy: LocationHierarchy | None = None,
) -> tuple[list[Sample], dict[str, str]]:
    """Filtered-style references plus perturbed predictions.

    Each forecast cycle draws ``stations_per_forecast`` random offices.
    Predictions keep, flip, relocate or drop reference sentences and
    sometimes add a spurious one, so scores spread over [0, 1].
    """
    rng = random.Random(seed)
    geo = Geography(hierarchy or default_hierarchy())
    stations = default_stations()
    offices = sorted(stations)
    samples: list[Sample] = []
    preds: dict[str, str] = {}
    cycle = datetime(2024, 1, 1, tzinfo=timezone.utc)
    while len(samples) < n_samples:
        cycle += timedelta(hours=6 * rng.randint(1, 8))
        chosen = rng.sample(offices, min(stations_per_forecast, n_samples - len(samples)))
        for office in chosen:
            st = stations[office]
            issue = cycle + timedelta(minutes=rng.randint(-170, 170))
            ref = [make_mention(rng, geo, st.node) for _ in range(rng.randint(0, 5))]
            pred = []
            for m in ref:
                r = rng.random()
                if r < 0.55:
                    pred.append(m)
                elif r < 0.70:
                    pred.append(flip(m, rng))
                elif r < 0.82:
                    pred.append(relocate(m, rng, geo, st.node))
                elif r < 0.92:
                    pred.append(replace(m, time=rng.choice(_TIMES)))
            if rng.random() < 0.3:
                pred.insert(rng.randint(0, len(pred)), make_mention(rng, geo, st.node))
            filler = rng.sample(_FILLER, 2)
            sid = f"{office}-{issue:%Y%m%d%H%M}"
            samples.append(
                Sample(
                    sample_id=sid,
                    station=office,
                    issue_time=issue,
                    forecast_id=pair_to_cycle(issue),
                    reference_text=" ".join(filter(None, [_text(ref), filler[0]])),
                )
            )
            preds[sid] = " ".join(filter(None, [_text(pred), filler[1]]))
    return samples, preds
