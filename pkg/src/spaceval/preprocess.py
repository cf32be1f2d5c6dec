"""AFD sentence filtering and dataset quality control."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from datetime import datetime
from functools import cached_property, lru_cache

from ._text import WORD_SEP, PhraseMatcher, collapse_ws
from .extraction import segment_sentences
from .hierarchy import read_data
from .ingest import PAIRING_WINDOW, Sample, cycle_time


class RulesError(ValueError):
    pass


@dataclass
class FilterRules:
    include_keywords: list[str]
    exclude_model_keywords: list[str]
    exclude_synoptic_keywords: list[str]
    lead_time_phrases: list[str]
    min_words: int = 30
    max_words: int = 200
    horizon_days: int = 2

    def __post_init__(self):
        for name in ("include_keywords", "exclude_model_keywords", "exclude_synoptic_keywords", "lead_time_phrases"):
            if not getattr(self, name):
                raise RulesError(f"{name} must not be empty")
        if not 0 <= self.min_words < self.max_words:
            raise RulesError(f"need 0 <= min_words < max_words, got {self.min_words}, {self.max_words}")
        if not 0 <= self.horizon_days <= 7:
            raise RulesError(f"horizon_days must be in 0..7, got {self.horizon_days}")

    @cached_property
    def include_matcher(self) -> PhraseMatcher:
        return PhraseMatcher(self.include_keywords, WORD_SEP, plural=True)

    @cached_property
    def exclude_matcher(self) -> PhraseMatcher:
        return PhraseMatcher(self.exclude_model_keywords + self.exclude_synoptic_keywords, WORD_SEP, plural=True)

    @cached_property
    def lead_time_matcher(self) -> PhraseMatcher:
        return PhraseMatcher(self.lead_time_phrases, WORD_SEP, plural=True)

    def __getstate__(self):
        return {k: v for k, v in self.__dict__.items() if not k.endswith("_matcher")}


_LIST_KINDS = {
    "include": "include_keywords",
    "exclude_model": "exclude_model_keywords",
    "exclude_synoptic": "exclude_synoptic_keywords",
    "lead_time": "lead_time_phrases",
}
_INT_KINDS = ("min_words", "max_words", "horizon_days")


def parse_filter_rules(text: str) -> FilterRules:
    """Read ``kind|value`` lines; list kinds repeat, integer kinds appear once."""
    lists: dict[str, list[str]] = {v: [] for v in _LIST_KINDS.values()}
    ints: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, sep, value = (p.strip() for p in line.partition("|"))
        if not sep or not value:
            raise RulesError(f"line {lineno}: expected 'kind|value'")
        if kind in _LIST_KINDS:
            lists[_LIST_KINDS[kind]].append(value)
        elif kind in _INT_KINDS:
            if kind in ints:
                raise RulesError(f"line {lineno}: {kind} given twice")
            try:
                ints[kind] = int(value)
            except ValueError:
                raise RulesError(f"line {lineno}: {kind} must be an integer, got {value!r}") from None
        else:
            raise RulesError(f"line {lineno}: unknown kind {kind!r}")
    return FilterRules(**lists, **ints)


@lru_cache(maxsize=None)
def default_rules() -> FilterRules:
    return parse_filter_rules(read_data("filter_rules.txt"))


# ---------------------------------------------------------------------------
# Filtering
# ---------------------------------------------------------------------------

WEEKDAYS = ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday")
_WEEKDAY_RE = re.compile(r"(?<![A-Za-z])(" + "|".join(WEEKDAYS) + r")s?(?![A-Za-z])", re.IGNORECASE)

STAGES = ("no-include", "excluded", "truncated")
REJECT_REASONS = ("lead-time", "too-short", "too-long")


def weekday_offset(issue_weekday: int, weekday: int) -> int:
    """Days until the next occurrence of ``weekday`` (1..7; same day is 7)."""
    return (weekday - issue_weekday - 1) % 7 + 1


def weekday_offsets(sentence: str, issue_weekday: int) -> list[int]:
    return [weekday_offset(issue_weekday, WEEKDAYS.index(m.group(1).lower())) for m in _WEEKDAY_RE.finditer(sentence)]


@dataclass
class FilterOutcome:
    text: str | None
    sentences: int = 0
    dropped: Counter = field(default_factory=Counter)
    reject_reason: str | None = None


def _join(sentences: list[str]) -> str:
    # blank lines always re-segment at the same places, so output is stable
    # under a second pass
    return "\n\n".join(sentences)


def filter_afd_detailed(raw_text: str, issue_time: datetime, rules: FilterRules) -> FilterOutcome:
    """:func:`filter_afd` plus per-stage sentence drop counts."""
    sentences = [collapse_ws(s) for s, _ in segment_sentences(raw_text)]
    out = FilterOutcome(None, sentences=len(sentences))

    kept = [s for s in sentences if rules.include_matcher.search(s)]
    out.dropped["no-include"] = len(sentences) - len(kept)

    before = len(kept)
    kept = [s for s in kept if not rules.exclude_matcher.search(s)]
    out.dropped["excluded"] = before - len(kept)

    issue_wd = issue_time.weekday()
    for i, s in enumerate(kept):
        if any(off > rules.horizon_days for off in weekday_offsets(s, issue_wd)):
            out.dropped["truncated"] = len(kept) - i
            kept = kept[:i]
            break
    else:
        out.dropped["truncated"] = 0

    text = _join(kept)
    n_words = len(text.split())
    if rules.lead_time_matcher.search(text):
        out.reject_reason = "lead-time"
    elif n_words < rules.min_words:
        out.reject_reason = "too-short"
    elif n_words > rules.max_words:
        out.reject_reason = "too-long"
    else:
        out.text = text
    return out


def filter_afd(raw_text: str, issue_time: datetime, rules: FilterRules | None = None) -> str | None:
    """Filtered reference text, or ``None`` when the sample is rejected.

    The weekday of ``issue_time`` anchors day-of-week truncation, so pass
    the local issuance time (with its UTC offset) where it is known.
    """
    return filter_afd_detailed(raw_text, issue_time, rules or default_rules()).text


@dataclass
class PreprocessSummary:
    samples_in: int = 0
    samples_out: int = 0
    sentences_in: int = 0
    sentences_dropped: Counter = field(default_factory=Counter)
    rejected: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict:
        return {
            "samples_in": self.samples_in,
            "samples_out": self.samples_out,
            "sentences_in": self.sentences_in,
            "sentences_dropped": {k: self.sentences_dropped.get(k, 0) for k in STAGES},
            "samples_rejected": {k: self.rejected.get(k, 0) for k in REJECT_REASONS},
        }


def preprocess_samples(samples: Iterable[Sample], rules: FilterRules | None = None) -> tuple[list[Sample], PreprocessSummary]:
    rules = rules or default_rules()
    summary = PreprocessSummary()
    kept = []
    for sample in samples:
        summary.samples_in += 1
        res = filter_afd_detailed(sample.reference_text, sample.local_time, rules)
        summary.sentences_in += res.sentences
        summary.sentences_dropped.update(res.dropped)
        if res.text is None:
            summary.rejected[res.reject_reason] += 1
            continue
        summary.samples_out += 1
        kept.append(
            Sample(
                sample.sample_id,
                sample.station,
                sample.issue_time,
                sample.forecast_id,
                res.text,
                sample.predicted_text,
                sample.issue_local,
            )
        )
    return kept, summary


# ---------------------------------------------------------------------------
# Quality control
# ---------------------------------------------------------------------------

QC_REASONS = ("missing-field", "control-characters", "unknown-station", "pairing-window", "duplicate")


def has_control_chars(text: str) -> bool:
    return any(unicodedata.category(c) == "Cc" and c not in "\n\r\t" for c in text)


@dataclass
class QCResult:
    kept: list[Sample]
    rejected: list[tuple[Sample, str]]

    @property
    def counts(self) -> dict[str, int]:
        c = Counter(reason for _, reason in self.rejected)
        return {r: c.get(r, 0) for r in QC_REASONS}


def _qc_reason(s: Sample, stations: Mapping | None) -> str | None:
    if not s.sample_id or not s.station or not s.reference_text or s.issue_time is None or not s.forecast_id:
        return "missing-field"
    if has_control_chars(s.reference_text) or (s.predicted_text and has_control_chars(s.predicted_text)):
        return "control-characters"
    if stations is not None and s.station not in stations:
        return "unknown-station"
    try:
        cycle = cycle_time(s.forecast_id)
    except ValueError:
        return "missing-field"
    if abs(s.issue_time - cycle) > PAIRING_WINDOW:
        return "pairing-window"
    return None


def quality_control(samples: Iterable[Sample], stations: Mapping | None = None) -> QCResult:
    """Split samples into kept and rejected-with-reason.

    Checks run in :data:`QC_REASONS` order; for exact-duplicate reference
    texts the first occurrence is kept.  ``stations`` (office -> anything)
    enables the registry check.
    """
    kept: list[Sample] = []
    rejected: list[tuple[Sample, str]] = []
    seen: set[str] = set()
    for s in samples:
        reason = _qc_reason(s, stations)
        if reason is None and s.reference_text in seen:
            reason = "duplicate"
        if reason is None:
            seen.add(s.reference_text)
            kept.append(s)
        else:
            rejected.append((s, reason))
    return QCResult(kept, rejected)

