"""Independent reference implementations used as test oracles.

These are deliberately naive: plain Python loops over the definitions,
sharing no code with the package beyond reading node data.
"""

from __future__ import annotations


def ancestors(parents: dict[str, tuple[str, ...]], node: str) -> set[str]:
    seen: set[str] = set()
    todo = list(parents[node])
    while todo:
        p = todo.pop()
        if p not in seen:
            seen.add(p)
            todo.extend(parents[p])
    return seen


def related(parents: dict[str, tuple[str, ...]], stop: set[str], a: str, b: str) -> bool:
    if a == b:
        return True
    aa, ab = ancestors(parents, a), ancestors(parents, b)
    if a in ab or b in aa:
        return True
    if a in stop or b in stop:
        return False
    return any(c not in stop for c in aa & ab)


def relation(hierarchy):
    """Relatedness predicate built only from the hierarchy's node data."""
    parents = {nid: n.parents for nid, n in hierarchy.nodes.items()}
    stop = set(hierarchy.stop_set)
    return lambda a, b: related(parents, stop, a, b)


def objects_related(rel, la, lb) -> bool:
    return any(rel(x, y) for x in la for y in lb)


def components(n: int, linked) -> list[set[int]]:
    """Transitive closure by repeated merging (no union-find)."""
    groups = [{i} for i in range(n)]
    changed = True
    while changed:
        changed = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if any(linked(x, y) for x in groups[i] for y in groups[j]):
                    groups[i] |= groups.pop(j)
                    changed = True
                    break
            if changed:
                break
    return groups


def match_counts(pred, ref, rel) -> dict[str, int]:
    """Object-level tally by enumerating every (pred, ref) pair.

    ``pred`` and ``ref`` are lists of (phase, locations).
    """
    mp = [any(p[0] == r[0] and objects_related(rel, p[1], r[1]) for r in ref) for p in pred]
    mr = [any(p[0] == r[0] and objects_related(rel, p[1], r[1]) for p in pred) for r in ref]
    return {
        "m_pred_L": sum(1 for p, m in zip(pred, mp) if m and p[0] == "L"),
        "m_pred_H": sum(1 for p, m in zip(pred, mp) if m and p[0] == "H"),
        "m_ref_L": sum(1 for r, m in zip(ref, mr) if m and r[0] == "L"),
        "m_ref_H": sum(1 for r, m in zip(ref, mr) if m and r[0] == "H"),
        "n_L": sum(1 for o in pred + ref if o[0] == "L"),
        "n_H": sum(1 for o in pred + ref if o[0] == "H"),
    }


def match_score(mpl, mph, mrl, mrh) -> float:
    if mpl + mph == 0 or mrl + mrh == 0:
        return 0.0
    return 1.0 - abs(mpl / (mpl + mph) - mrl / (mrl + mrh))


def coverage_ratio(mpl, mph, mrl, mrh, nl, nh) -> float:
    return (mpl + mph + mrl + mrh) / (nl + nh)


def lcs_dp(a, b) -> int:
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]
