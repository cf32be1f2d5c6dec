"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``SPACEVAL_DISABLE_NUMBA=1`` before import to force the numpy path
(useful for debugging and for checking that both paths agree).
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SPACEVAL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by SPACEVAL_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# Longest common subsequence
# ---------------------------------------------------------------------------


def lcs_length_numpy(a: np.ndarray, b: np.ndarray) -> int:
    """LCS length with one vectorised row update per element of ``a``.

    The row recurrence ``cur[j] = max(cur[j-1], x[j])`` with
    ``x[j] = prev[j-1] + 1 if a[i] == b[j] else prev[j]`` is a running
    maximum, so each row is a single ``np.maximum.accumulate``.
    """
    if len(a) == 0 or len(b) == 0:
        return 0
    prev = np.zeros(len(b) + 1, dtype=np.int64)
    cur = np.zeros_like(prev)
    for token in a:
        x = np.where(b == token, prev[:-1] + 1, prev[1:])
        np.maximum.accumulate(x, out=cur[1:])
        prev, cur = cur, prev
    return int(prev[-1])


def components_numpy(adj: np.ndarray) -> np.ndarray:
    """Connected-component labels by min-label propagation.

    Each label is the smallest vertex index in its component.
    """
    n = adj.shape[0]
    labels = np.arange(n, dtype=np.int64)
    if n == 0:
        return labels
    big = np.int64(n)
    reach = adj | np.eye(n, dtype=bool)
    while True:
        cand = np.where(reach, labels[None, :], big).min(axis=1)
        if np.array_equal(cand, labels):
            return labels
        labels = cand


if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _lcs_length_jit(a, b):
        n = b.shape[0]
        prev = np.zeros(n + 1, dtype=np.int64)
        cur = np.zeros(n + 1, dtype=np.int64)
        for i in range(a.shape[0]):
            ai = a[i]
            for j in range(n):
                if ai == b[j]:
                    cur[j + 1] = prev[j] + 1
                elif prev[j + 1] >= cur[j]:
                    cur[j + 1] = prev[j + 1]
                else:
                    cur[j + 1] = cur[j]
            prev, cur = cur, prev
        return prev[n]

    @njit(cache=True, nogil=True)
    def _find(parent, i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            nxt = parent[i]
            parent[i] = root
            i = nxt
        return root

    @njit(cache=True, nogil=True)
    def _components_jit(adj):
        n = adj.shape[0]
        parent = np.arange(n)
        for i in range(n):
            for j in range(i + 1, n):
                if adj[i, j] or adj[j, i]:
                    ri = _find(parent, i)
                    rj = _find(parent, j)
                    # the smaller index stays root, so labels are component minima
                    if ri < rj:
                        parent[rj] = ri
                    elif rj < ri:
                        parent[ri] = rj
        labels = np.empty(n, dtype=np.int64)
        for i in range(n):
            labels[i] = _find(parent, i)
        return labels

    def lcs_length(a: np.ndarray, b: np.ndarray) -> int:
        if len(a) == 0 or len(b) == 0:
            return 0
        return int(_lcs_length_jit(a, b))

    def connected_components(adj: np.ndarray) -> np.ndarray:
        if adj.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        return _components_jit(np.ascontiguousarray(adj, dtype=np.bool_))

else:
    lcs_length = lcs_length_numpy

    def connected_components(adj: np.ndarray) -> np.ndarray:
        adj = np.asarray(adj, dtype=bool)
        return components_numpy(adj | adj.T)


BACKEND = "numba" if HAVE_NUMBA else "numpy"
