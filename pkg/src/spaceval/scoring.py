"""Grouping, cross-text matching and the SPACE score.

The score for one comparison is ``s = s_m * r_c`` where::

    s_m = 1 - | mL_pred / (mL_pred + mH_pred) - mL_ref / (mL_ref + mH_ref) |
    r_c = (mL_pred + mH_pred + mL_ref + mH_ref) / (n_L + n_H)

``m*`` count matched negative (L) / positive (H) objects on each side and
``n_L``, ``n_H`` count all objects in both texts.
"""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .extraction import Phase, PhenomenonConfig, PhenomenonObject, Source, extract_objects
from .hierarchy import LocationHierarchy


class Mode(str, enum.Enum):
    LOCAL = "local"
    AGGREGATE = "aggregate"


class Counting(str, enum.Enum):
    # object: an object counts when it has a same-phase related partner
    # group: every member of a matched group counts
    OBJECT = "object"
    GROUP = "group"


class UndefinedScoreError(ValueError):
    """Raised for a coverage ratio over zero objects."""


class ForecastMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ObjectGroup:
    source: Source
    members: tuple[PhenomenonObject, ...]

    @property
    def phases(self) -> frozenset[Phase]:
        return frozenset(o.phase for o in self.members)

    @property
    def location_closure(self) -> frozenset[str]:
        return frozenset(loc for o in self.members for loc in o.locations)


@dataclass(frozen=True)
class MatchTally:
    m_pred_L: int = 0
    m_pred_H: int = 0
    m_ref_L: int = 0
    m_ref_H: int = 0
    n_L: int = 0
    n_H: int = 0

    def __post_init__(self):
        vals = (self.m_pred_L, self.m_pred_H, self.m_ref_L, self.m_ref_H, self.n_L, self.n_H)
        if any(v < 0 for v in vals):
            raise ValueError(f"negative count in {self}")
        if self.m_pred_L + self.m_ref_L > self.n_L or self.m_pred_H + self.m_ref_H > self.n_H:
            raise ValueError(f"matched counts exceed totals in {self}")

    @property
    def matched_pred(self) -> int:
        return self.m_pred_L + self.m_pred_H

    @property
    def matched_ref(self) -> int:
        return self.m_ref_L + self.m_ref_H

    @property
    def total(self) -> int:
        return self.n_L + self.n_H


@dataclass(frozen=True)
class SpaceScore:
    s_m: float | None
    r_c: float | None
    s: float | None
    mode: Mode
    phenomenon: str
    defined: bool
    tally: MatchTally

    def to_record(self, sample_id=None, forecast_id=None, station=None) -> dict:
        t = self.tally
        return {
            "sample_id": sample_id,
            "forecast_id": forecast_id,
            "station": station,
            "phenomenon": self.phenomenon,
            "mode": self.mode.value,
            "s_m": self.s_m,
            "r_c": self.r_c,
            "s": self.s,
            "defined": self.defined,
            "n_L": t.n_L,
            "n_H": t.n_H,
            "m_pred_L": t.m_pred_L,
            "m_pred_H": t.m_pred_H,
            "m_ref_L": t.m_ref_L,
            "m_ref_H": t.m_ref_H,
        }


# ---------------------------------------------------------------------------
# Equations
# ---------------------------------------------------------------------------


def match_score(t: MatchTally) -> float:
    """Agreement of the negative-phase share among matched objects.

    Zero when either side has no matched objects.
    """
    mp, mr = t.matched_pred, t.matched_ref
    if mp == 0 or mr == 0:
        return 0.0
    return 1.0 - abs(t.m_pred_L / mp - t.m_ref_L / mr)


def coverage_ratio(t: MatchTally) -> float:
    if t.total == 0:
        raise UndefinedScoreError("coverage ratio is undefined with no objects in either text")
    return (t.matched_pred + t.matched_ref) / t.total


# ---------------------------------------------------------------------------
# Grouping and matching
# ---------------------------------------------------------------------------


def object_relatedness(
    a: Sequence[PhenomenonObject], b: Sequence[PhenomenonObject], hierarchy: LocationHierarchy
) -> np.ndarray:
    """``out[i, j]`` is True when some location of ``a[i]`` relates to one of ``b[j]``."""
    if not a or not b:
        return np.zeros((len(a), len(b)), dtype=bool)
    idx = hierarchy.index
    la = [idx(loc) for o in a for loc in o.locations]
    lb = [idx(loc) for o in b for loc in o.locations]
    starts_a = np.cumsum([0] + [len(o.locations) for o in a[:-1]])
    starts_b = np.cumsum([0] + [len(o.locations) for o in b[:-1]])
    sub = hierarchy.related_matrix[np.ix_(la, lb)]
    sub = np.logical_or.reduceat(sub, starts_a, axis=0)
    return np.logical_or.reduceat(sub, starts_b, axis=1)


def group_objects(objects: Sequence[PhenomenonObject], hierarchy: LocationHierarchy) -> list[ObjectGroup]:
    """Partition same-source objects into location-connected groups.

    Groups come out ordered by their first member's position in ``objects``
    (document order for a single text); members keep input order.
    """
    if not objects:
        return []
    sources = {o.source for o in objects}
    if len(sources) > 1:
        raise ValueError("group_objects needs objects from a single source")
    adj = object_relatedness(objects, objects, hierarchy)
    labels = _kernels.connected_components(adj)
    buckets: dict[int, list[PhenomenonObject]] = {}
    for obj, lab in zip(objects, labels.tolist()):
        buckets.setdefault(lab, []).append(obj)
    src = next(iter(sources))
    return [ObjectGroup(src, tuple(buckets[k])) for k in sorted(buckets)]


def _phase_array(objs: Sequence[PhenomenonObject]) -> np.ndarray:
    return np.fromiter((o.phase is Phase.L for o in objs), dtype=bool, count=len(objs))


def match_groups(
    pred_groups: Sequence[ObjectGroup],
    ref_groups: Sequence[ObjectGroup],
    hierarchy: LocationHierarchy,
    counting: Counting | str = Counting.OBJECT,
) -> MatchTally:
    """Tally matched objects between predicted and reference groups.

    A predicted and a reference group match when some member pair shares a
    phase and has related locations.  With ``counting="object"`` (default)
    an object counts as matched when it takes part in such a pair itself;
    ``counting="group"`` counts every member of any matched group.  Each
    object is counted at most once.
    """
    counting = Counting(counting)
    pred = [o for g in pred_groups for o in g.members]
    ref = [o for g in ref_groups for o in g.members]
    p_low, r_low = _phase_array(pred), _phase_array(ref)
    n_L = int(p_low.sum() + r_low.sum())
    n_H = len(pred) + len(ref) - n_L
    if not pred or not ref:
        return MatchTally(n_L=n_L, n_H=n_H)

    ok = object_relatedness(pred, ref, hierarchy) & (p_low[:, None] == r_low[None, :])
    if counting is Counting.OBJECT:
        mp, mr = ok.any(axis=1), ok.any(axis=0)
    else:
        gp = np.repeat(np.arange(len(pred_groups)), [len(g.members) for g in pred_groups])
        gr = np.repeat(np.arange(len(ref_groups)), [len(g.members) for g in ref_groups])
        pair = np.zeros((len(pred_groups), len(ref_groups)), dtype=bool)
        ii, jj = np.nonzero(ok)
        pair[gp[ii], gr[jj]] = True
        mp = pair.any(axis=1)[gp]
        mr = pair.any(axis=0)[gr]
    return MatchTally(
        m_pred_L=int((mp & p_low).sum()),
        m_pred_H=int((mp & ~p_low).sum()),
        m_ref_L=int((mr & r_low).sum()),
        m_ref_H=int((mr & ~r_low).sum()),
        n_L=n_L,
        n_H=n_H,
    )


def score_tally(tally: MatchTally, mode: Mode | str, phenomenon: str) -> SpaceScore:
    mode = Mode(mode)
    if tally.total == 0:
        return SpaceScore(None, None, None, mode, phenomenon, False, tally)
    s_m = match_score(tally)
    r_c = coverage_ratio(tally)
    return SpaceScore(s_m, r_c, s_m * r_c, mode, phenomenon, True, tally)


def score_objects(
    pred: Sequence[PhenomenonObject],
    ref: Sequence[PhenomenonObject],
    hierarchy: LocationHierarchy,
    phenomenon: str,
    mode: Mode | str = Mode.LOCAL,
    counting: Counting | str = Counting.OBJECT,
) -> SpaceScore:
    tally = match_groups(group_objects(pred, hierarchy), group_objects(ref, hierarchy), hierarchy, counting)
    return score_tally(tally, mode, phenomenon)


def space_local(
    pred_text: str,
    ref_text: str,
    station: str,
    config: PhenomenonConfig,
    hierarchy: LocationHierarchy,
    counting: Counting | str = Counting.OBJECT,
) -> SpaceScore:
    """Score one predicted/reference discussion pair for one station."""
    pred = extract_objects(pred_text, config, hierarchy, station, Source.PREDICTED)
    ref = extract_objects(ref_text, config, hierarchy, station, Source.REFERENCE)
    return score_objects(pred, ref, hierarchy, config.name, Mode.LOCAL, counting)


def space_aggregate(
    pred_texts: Sequence[tuple[str, str]],
    ref_texts: Sequence[tuple[str, str]],
    config: PhenomenonConfig,
    hierarchy: LocationHierarchy,
    counting: Counting | str = Counting.OBJECT,
    *,
    pred_forecast: str | None = None,
    ref_forecast: str | None = None,
) -> SpaceScore:
    """Score all station discussions of one forecast pooled together.

    ``pred_texts`` and ``ref_texts`` are ``(station, text)`` pairs.  Each
    text's objects keep their own station binding before pooling.
    """
    if pred_forecast is not None and ref_forecast is not None and pred_forecast != ref_forecast:
        raise ForecastMismatchError(f"predicted forecast {pred_forecast!r} != reference forecast {ref_forecast!r}")
    pred = [o for st, txt in pred_texts for o in extract_objects(txt, config, hierarchy, st, Source.PREDICTED)]
    ref = [o for st, txt in ref_texts for o in extract_objects(txt, config, hierarchy, st, Source.REFERENCE)]
    return score_objects(pred, ref, hierarchy, config.name, Mode.AGGREGATE, counting)
