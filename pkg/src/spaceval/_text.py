"""Phrase matching shared by the hierarchy, extraction and filtering code."""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator

WORD_SEP = r"\s+"
# location aliases tolerate "Charleston, SC" for an alias declared "Charleston SC"
ALIAS_SEP = r",?\s+"
# scoring terms tolerate "low-pressure" for "low pressure"
TERM_SEP = r"[\s-]+"

_WS = re.compile(r"\s+")


def fold(s: str) -> str:
    """Case-fold and collapse runs of whitespace to single spaces."""
    return " ".join(s.casefold().split())


def _trie_regex(words: Iterable[str], sep: str) -> str:
    # A prefix trie compiled to nested groups keeps the regex engine from
    # trying every alternative at every offset; greedy optional groups make
    # the longest phrase win at a given start position.
    trie: dict = {}
    for w in words:
        node = trie
        for ch in w:
            node = node.setdefault(ch, {})
        node[""] = True

    def emit(node: dict) -> str:
        terminal = "" in node
        branches = []
        for ch in sorted(k for k in node if k):
            atom = sep if ch == " " else re.escape(ch)
            branches.append(atom + emit(node[ch]))
        if not branches:
            return ""
        body = branches[0] if len(branches) == 1 else "(?:" + "|".join(branches) + ")"
        if terminal:
            return "(?:" + body + ")?"
        return body

    return emit(trie)


class PhraseMatcher:
    """Case-insensitive, word-bounded, leftmost-longest phrase scanner.

    ``finditer`` yields ``(start, end, phrase)`` where ``phrase`` is the
    declared phrase (as given to the constructor) that matched.
    """

    def __init__(self, phrases: Iterable[str], sep: str = WORD_SEP, plural: bool = False):
        self.sep = sep
        self._sep_re = re.compile(sep)
        self._lookup: dict[str, str] = {}
        for p in phrases:
            key = self._key(p)
            if not key:
                continue
            self._lookup.setdefault(key, p)
        self.phrases = tuple(self._lookup.values())
        if self._lookup:
            body = _trie_regex(sorted(self._lookup), sep)
            suffix = "(?:es|s)?" if plural else ""
            pattern = r"(?<![A-Za-z0-9])(?P<p>" + body + ")" + suffix + r"(?![A-Za-z0-9])"
            self._re: re.Pattern | None = re.compile(pattern, re.IGNORECASE)
        else:
            self._re = None

    def _key(self, s: str) -> str:
        return self._sep_re.sub(" ", s.casefold()).strip()

    def finditer(self, text: str, pos: int = 0, endpos: int | None = None) -> Iterator[tuple[int, int, str]]:
        if self._re is None:
            return
        if endpos is None:
            endpos = len(text)
        for m in self._re.finditer(text, pos, endpos):
            yield m.start(), m.end(), self._lookup[self._key(m.group("p"))]

    def search(self, text: str) -> bool:
        return self._re is not None and self._re.search(text) is not None

    def __bool__(self) -> bool:
        return self._re is not None


def collapse_ws(s: str) -> str:
    return _WS.sub(" ", s).strip()
