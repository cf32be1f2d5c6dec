"""Three-level spatial hierarchy of North American location terms.

Two locations are *related* when they are equal, when one is an ancestor of
the other, or when they share a non-stop ancestor and neither of them is a
stop node.  The hierarchy is loaded from a pipe-delimited text file::

    id|scale|canonical_name|parent_id[,parent_id...]|alias[,alias...]|stop_flag

``scale`` is one of ``L``, ``M``, ``S``; ``stop_flag`` is ``0`` or ``1``.
Blank lines and ``#`` comments are ignored.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from functools import cached_property, lru_cache
from importlib import resources

import numpy as np

from ._text import ALIAS_SEP, PhraseMatcher, fold


class Scale(enum.Enum):
    LARGE = "L"
    MEDIUM = "M"
    SMALL = "S"

    @property
    def rank(self) -> int:
        return {"S": 0, "M": 1, "L": 2}[self.value]


class HierarchyError(ValueError):
    """Base class for hierarchy definition problems."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HierarchyParseError(HierarchyError):
    pass


class DuplicateAliasError(HierarchyError):
    pass


class CycleError(HierarchyError):
    pass


class UnknownParentError(HierarchyError):
    pass


class StopListError(HierarchyError):
    pass


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class LocationNode:
    id: str
    scale: Scale
    canonical_name: str
    parents: tuple[str, ...] = ()
    aliases: tuple[str, ...] = ()
    stop: bool = False


class LocationHierarchy:
    """Immutable, validated location graph.

    Build with :func:`load_hierarchy` or :meth:`from_nodes`; both run the
    full validation (unknown parents, scale direction, cycles, duplicate
    aliases, and optionally the stop list).
    """

    def __init__(self, nodes: dict[str, LocationNode], alias_index: dict[str, str]):
        self.nodes = dict(nodes)
        self.alias_index = dict(alias_index)
        self.stop_set = frozenset(n.id for n in nodes.values() if n.stop)
        self.ids = tuple(sorted(self.nodes))
        self._pos = {nid: i for i, nid in enumerate(self.ids)}

    @classmethod
    def from_nodes(
        cls,
        nodes: Iterable[LocationNode],
        stop_terms: Iterable[str] | None = None,
        lines: dict[str, int] | None = None,
    ) -> LocationHierarchy:
        lines = lines or {}
        by_id: dict[str, LocationNode] = {}
        for node in nodes:
            if node.id in by_id:
                raise HierarchyParseError(f"duplicate node id {node.id!r}", lines.get(node.id))
            by_id[node.id] = node
        alias_index = _build_alias_index(by_id.values(), lines)
        _check_parents(by_id, lines)
        _check_acyclic(by_id)
        h = cls(by_id, alias_index)
        if stop_terms is not None:
            _check_stop_list(h, stop_terms)
        return h

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: object) -> bool:
        return node_id in self.nodes

    def __getitem__(self, node_id: str) -> LocationNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def __getstate__(self):
        # derived caches (regex, matrices) are rebuilt lazily after unpickling
        return {"nodes": self.nodes, "alias_index": self.alias_index}

    def __setstate__(self, state):
        self.__init__(state["nodes"], state["alias_index"])

    def resolve(self, surface: str) -> str | None:
        return self.alias_index.get(fold(surface))

    def index(self, node_id: str) -> int:
        try:
            return self._pos[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    @cached_property
    def _ancestors(self) -> dict[str, frozenset[str]]:
        memo: dict[str, frozenset[str]] = {}

        def visit(nid: str) -> frozenset[str]:
            if nid not in memo:
                acc: set[str] = set()
                for p in self.nodes[nid].parents:
                    acc.add(p)
                    acc |= visit(p)
                memo[nid] = frozenset(acc)
            return memo[nid]

        for nid in self.ids:
            visit(nid)
        return memo

    def ancestors(self, node_id: str) -> frozenset[str]:
        """All proper ancestors of ``node_id`` at any distance."""
        self[node_id]
        return self._ancestors[node_id]

    @cached_property
    def related_matrix(self) -> np.ndarray:
        """Dense boolean relatedness matrix indexed by :meth:`index`."""
        n = len(self.ids)
        anc = np.zeros((n, n), dtype=bool)
        for nid in self.ids:
            i = self._pos[nid]
            for a in self._ancestors[nid]:
                anc[i, self._pos[a]] = True
        stop = np.zeros(n, dtype=bool)
        for nid in self.stop_set:
            stop[self._pos[nid]] = True
        shared = anc[:, ~stop].astype(np.float32)
        common = (shared @ shared.T) > 0
        common &= ~stop[:, None]
        common &= ~stop[None, :]
        rel = np.eye(n, dtype=bool) | anc | anc.T | common
        rel.setflags(write=False)
        return rel

    def related(self, a: str, b: str) -> bool:
        return bool(self.related_matrix[self.index(a), self.index(b)])

    @cached_property
    def matcher(self) -> PhraseMatcher:
        return PhraseMatcher(self.alias_index, sep=ALIAS_SEP)

    def find_locations(self, text: str, pos: int = 0, endpos: int | None = None) -> Iterator[tuple[int, int, str]]:
        """Yield ``(start, end, node_id)`` for alias mentions in ``text``."""
        for start, end, alias in self.matcher.finditer(text, pos, endpos):
            yield start, end, self.alias_index[alias]


def _build_alias_index(nodes: Iterable[LocationNode], lines: dict[str, int]) -> dict[str, str]:
    index: dict[str, str] = {}
    for node in nodes:
        for alias in node.aliases:
            key = fold(alias)
            if not key:
                raise HierarchyParseError(f"empty alias on node {node.id!r}", lines.get(node.id))
            if key in index:
                raise DuplicateAliasError(
                    f"alias {alias!r} on node {node.id!r} already declared on node {index[key]!r}",
                    lines.get(node.id),
                )
            index[key] = node.id
    return index


def _check_parents(nodes: dict[str, LocationNode], lines: dict[str, int]) -> None:
    for node in nodes.values():
        for p in node.parents:
            if p not in nodes:
                raise UnknownParentError(f"node {node.id!r} names unknown parent {p!r}", lines.get(node.id))
            if nodes[p].scale.rank < node.scale.rank:
                raise HierarchyParseError(
                    f"node {node.id!r} ({node.scale.name.lower()}) cannot have smaller-scale parent {p!r}",
                    lines.get(node.id),
                )


def _check_acyclic(nodes: dict[str, LocationNode]) -> None:
    white, grey, black = 0, 1, 2
    colour = dict.fromkeys(nodes, white)
    for root in sorted(nodes):
        if colour[root] != white:
            continue
        stack = [(root, iter(nodes[root].parents))]
        colour[root] = grey
        while stack:
            nid, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[nid] = black
                stack.pop()
            elif colour[nxt] == grey:
                path = [s[0] for s in stack]
                cycle = path[path.index(nxt):] + [nxt]
                raise CycleError("cycle through " + " -> ".join(cycle))
            elif colour[nxt] == white:
                colour[nxt] = grey
                stack.append((nxt, iter(nodes[nxt].parents)))


def _check_stop_list(h: LocationHierarchy, stop_terms: Iterable[str]) -> None:
    listed: set[str] = set()
    for term in stop_terms:
        nid = h.resolve(term)
        if nid is None:
            raise StopListError(f"stop term {term!r} matches no alias")
        if not h.nodes[nid].stop:
            raise StopListError(f"stop term {term!r} resolves to non-stop node {nid!r}")
        listed.add(nid)
    unlisted = sorted(h.stop_set - listed)
    if unlisted:
        raise StopListError(f"stop nodes missing from the stop list: {', '.join(unlisted)}")


_SCALES = {s.value: s for s in Scale}


def parse_hierarchy(definition_text: str) -> list[LocationNode]:
    """Parse hierarchy records without cross-record validation."""
    nodes = []
    for lineno, raw in enumerate(definition_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 6:
            raise HierarchyParseError(f"expected 6 '|'-separated fields, got {len(fields)}", lineno)
        nid, scale, name, parents, aliases, stop = fields
        if not nid:
            raise HierarchyParseError("empty node id", lineno)
        if scale not in _SCALES:
            raise HierarchyParseError(f"bad scale {scale!r} (expected L, M or S)", lineno)
        if stop not in ("0", "1"):
            raise HierarchyParseError(f"bad stop flag {stop!r} (expected 0 or 1)", lineno)
        nodes.append(
            LocationNode(
                id=nid,
                scale=_SCALES[scale],
                canonical_name=name or nid,
                parents=tuple(p.strip() for p in parents.split(",") if p.strip()),
                aliases=tuple(a.strip() for a in aliases.split(",") if a.strip()),
                stop=stop == "1",
            )
        )
    return nodes


def load_hierarchy(definition_text: str, stop_terms: Iterable[str] | None = None) -> LocationHierarchy:
    """Parse and validate a hierarchy definition.

    Errors carry the offending line number where one exists.  When
    ``stop_terms`` is given, every term must resolve to a stop node and every
    stop node must be named by at least one term.
    """
    return LocationHierarchy.from_nodes(
        parse_hierarchy(definition_text), stop_terms, lines=_node_lines(definition_text)
    )


def _node_lines(definition_text: str) -> dict[str, int]:
    out = {}
    for lineno, raw in enumerate(definition_text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            out.setdefault(line.split("|", 1)[0].strip(), lineno)
    return out


def read_data(name: str) -> str:
    return resources.files("spaceval").joinpath("data", name).read_text(encoding="utf-8")


def read_stop_terms(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


STOP_TERMS: tuple[str, ...] = tuple(read_stop_terms(read_data("stop_nodes.txt")))


@lru_cache(maxsize=None)
def default_hierarchy() -> LocationHierarchy:
    """The shipped North American hierarchy, validated against the stop list."""
    return load_hierarchy(read_data("hierarchy.txt"), STOP_TERMS)
