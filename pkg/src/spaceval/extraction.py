"""Phenomenon-object extraction from forecast discussion text."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from ._text import TERM_SEP, PhraseMatcher, fold
from .hierarchy import LocationHierarchy, read_data


class Phase(str, enum.Enum):
    """Phenomenon polarity: ``H`` positive (high/warm), ``L`` negative (low/cold)."""

    H = "H"
    L = "L"


class Source(str, enum.Enum):
    PREDICTED = "predicted"
    REFERENCE = "reference"


class UnknownStationError(KeyError):
    pass


class ConfigError(ValueError):
    pass


@dataclass
class PhenomenonConfig:
    name: str
    positive_terms: tuple[str, ...]
    negative_terms: tuple[str, ...]
    exclusion_patterns: tuple[str, ...] = ()

    def __post_init__(self):
        self.positive_terms = tuple(self.positive_terms)
        self.negative_terms = tuple(self.negative_terms)
        self.exclusion_patterns = tuple(self.exclusion_patterns)
        pos = {fold(t) for t in self.positive_terms}
        neg = {fold(t) for t in self.negative_terms}
        both = pos & neg
        if both:
            raise ConfigError(f"{self.name}: terms listed with both phases: {sorted(both)}")
        for pat in self.exclusion_patterns:
            fp = fold(pat)
            if not any(t in fp and t != fp for t in pos | neg):
                raise ConfigError(f"{self.name}: exclusion {pat!r} contains no scoring term")

    @cached_property
    def phase_of(self) -> dict[str, Phase]:
        out = {t: Phase.H for t in self.positive_terms}
        out.update({t: Phase.L for t in self.negative_terms})
        return out

    @cached_property
    def term_matcher(self) -> PhraseMatcher:
        return PhraseMatcher(self.positive_terms + self.negative_terms, sep=TERM_SEP, plural=True)

    @cached_property
    def exclusion_matcher(self) -> PhraseMatcher:
        return PhraseMatcher(self.exclusion_patterns, sep=TERM_SEP, plural=True)

    def __getstate__(self):
        return {k: getattr(self, k) for k in ("name", "positive_terms", "negative_terms", "exclusion_patterns")}

    def __setstate__(self, state):
        self.__dict__.update(state)


def parse_phenomenon_config(text: str, name: str) -> PhenomenonConfig:
    """Read ``phase|phrase`` and ``exclude|phrase`` lines."""
    pos: list[str] = []
    neg: list[str] = []
    excl: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        kind, sep, phrase = line.partition("|")
        kind = kind.strip().lower()
        phrase = phrase.strip()
        if not sep or not phrase:
            raise ConfigError(f"line {lineno}: expected 'phase|phrase'")
        if kind in ("h", "positive", "+"):
            pos.append(phrase)
        elif kind in ("l", "negative", "-"):
            neg.append(phrase)
        elif kind == "exclude":
            excl.append(phrase)
        else:
            raise ConfigError(f"line {lineno}: unknown kind {kind!r}")
    return PhenomenonConfig(name, tuple(pos), tuple(neg), tuple(excl))


@lru_cache(maxsize=None)
def builtin_config(name: str) -> PhenomenonConfig:
    if name not in ("pressure", "temperature"):
        raise ConfigError(f"no built-in phenomenon {name!r}")
    return parse_phenomenon_config(read_data(f"{name}.txt"), name)


@dataclass(frozen=True)
class PhenomenonObject:
    phase: Phase
    term: str
    locations: tuple[str, ...]
    sentence_index: int
    char_span: tuple[int, int]
    source: Source = Source.PREDICTED
    # set when the discussion's home station was bound implicitly
    implicit: bool = field(default=False, compare=False)


# ---------------------------------------------------------------------------
# Sentence segmentation
# ---------------------------------------------------------------------------

# units, compass points and months end a sentence only before a capital
_SOFT_ABBREVIATIONS = frozenset(
    """
    mph kt kts ft mi deg etc a.m p.m
    jan feb mar apr jun jul aug sep sept oct nov dec
    n s e w ne nw se sw nne ene ese sse ssw wsw wnw nnw
    """.split()
)
# these precede a name or continue the clause, so never end a sentence
_HARD_ABBREVIATIONS = frozenset("approx vs e.g i.e u.s u.s.a st mt".split())

# blank lines and AFD "&&" / "$$" separator lines form their own blocks;
# ".HEADER..." lines are blocks of their own, and a line opening with
# ".WORD" starts a new block
_SEPARATOR_LINE = re.compile(r"^[ \t]*(?:&&|\$\$)?[ \t]*$", re.M)
_HEADER_LINE = re.compile(r"^\.[A-Za-z][^\n]*\.\.\.[ \t]*$", re.M)
_SECTION_HEADER = re.compile(r"^\.(?=[A-Za-z])", re.M)
_TERMINATOR = re.compile(r"[.!?]+[\"')\]]*(?=\s|$)")


def _word_before(text: str, pos: int, floor: int) -> str:
    i = pos
    while i > floor and not text[i - 1].isspace():
        i -= 1
    return text[i:pos].lstrip("\"'([").lower()


def _is_boundary(text: str, m: re.Match, floor: int) -> bool:
    punct = m.group(0).rstrip("\"')]")
    if punct != ".":
        # '!' / '?' always end a sentence; '..' and longer runs are AFD ellipses
        return not set(punct) <= {"."}
    word = _word_before(text, m.start(), floor)
    if word in _HARD_ABBREVIATIONS:
        return False
    if word in _SOFT_ABBREVIATIONS:
        nxt = text[m.end() :].lstrip()[:1]
        return nxt.isupper()
    return True


def segment_sentences(text: str) -> list[tuple[str, tuple[int, int]]]:
    """Split ``text`` into sentences, returning ``(sentence, (start, end))``.

    Breaks on ``.``, ``!`` and ``?`` followed by whitespace, and on blank
    lines, ``&&``/``$$`` separator lines and ``.HEADER`` lines.  Decimal
    points, ellipses and common abbreviations (``U.S.``, and ``mph`` or
    compass points such as ``N.`` unless a capital follows) do not break.  Ranges are stripped of surrounding
    whitespace.
    """
    cuts = {0, len(text)}
    for m in _SEPARATOR_LINE.finditer(text):
        cuts.add(m.start())
        cuts.add(m.end())
    for m in _HEADER_LINE.finditer(text):
        cuts.add(m.start())
        cuts.add(m.end())
    cuts.update(m.start() for m in _SECTION_HEADER.finditer(text))
    ordered = sorted(cuts)
    out: list[tuple[str, tuple[int, int]]] = []
    for a, b in zip(ordered, ordered[1:]):
        pos = a
        for m in _TERMINATOR.finditer(text, a, b):
            if _is_boundary(text, m, a):
                _emit(text, pos, m.end(), out)
                pos = m.end()
        _emit(text, pos, b, out)
    return out


def _emit(text: str, start: int, end: int, out: list) -> None:
    seg = text[start:end]
    lead = len(seg) - len(seg.lstrip())
    trail = len(seg.rstrip())
    if trail > lead:
        out.append((text[start + lead : start + trail], (start + lead, start + trail)))


# ---------------------------------------------------------------------------
# Object extraction
# ---------------------------------------------------------------------------


def extract_objects(
    text: str,
    config: PhenomenonConfig,
    hierarchy: LocationHierarchy,
    station: str,
    source: Source | str = Source.PREDICTED,
) -> list[PhenomenonObject]:
    """Extract phase-tagged phenomenon objects in document order.

    Each term occurrence (outside any exclusion pattern) becomes one object
    bound to every location mentioned after it in the same sentence.  With
    no following location ("over the forecast area", "locally", or nothing
    at all) the object is bound to ``station``.
    """
    if station not in hierarchy:
        raise UnknownStationError(station)
    source = Source(source)
    objects: list[PhenomenonObject] = []
    terms = config.term_matcher
    excl = config.exclusion_matcher
    for sidx, (_, (start, end)) in enumerate(segment_sentences(text)):
        found = list(terms.finditer(text, start, end))
        if not found:
            continue
        blocked = list(excl.finditer(text, start, end)) if excl else []
        locs = list(hierarchy.find_locations(text, start, end))
        for tstart, tend, term in found:
            if any(bs < tend and tstart < be for bs, be, _ in blocked):
                continue
            bound: dict[str, None] = {}
            for lstart, _, nid in locs:
                if lstart >= tend:
                    bound.setdefault(nid, None)
            implicit = not bound
            objects.append(
                PhenomenonObject(
                    phase=config.phase_of[term],
                    term=term,
                    locations=(station,) if implicit else tuple(bound),
                    sentence_index=sidx,
                    char_span=(tstart, tend),
                    source=source,
                    implicit=implicit,
                )
            )
    return objects
