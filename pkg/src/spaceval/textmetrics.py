"""ROUGE-L and token F1 over a fixed tokenizer.

Tokenizer: lowercase the text, then take maximal runs of ``[a-z0-9]``.
Everything else (punctuation, whitespace, non-ASCII) separates tokens.
"""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Sequence

import numpy as np

from . import _kernels

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def _f_measure(overlap: int, n_pred: int, n_ref: int) -> float:
    if overlap == 0:
        return 0.0
    p = overlap / n_pred
    r = overlap / n_ref
    return 2 * p * r / (p + r)


def _encode(pred: Sequence[str], ref: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    vocab: dict[str, int] = {}
    a = np.fromiter((vocab.setdefault(t, len(vocab)) for t in pred), dtype=np.int64, count=len(pred))
    b = np.fromiter((vocab.setdefault(t, len(vocab)) for t in ref), dtype=np.int64, count=len(ref))
    return a, b


def lcs_length(pred: Sequence[str], ref: Sequence[str]) -> int:
    if not pred or not ref:
        return 0
    a, b = _encode(pred, ref)
    return _kernels.lcs_length(a, b)


def rouge_l(pred: Sequence[str], ref: Sequence[str]) -> float:
    """LCS-based F-measure (beta = 1); 0 when either side is empty."""
    if not pred or not ref:
        return 0.0
    return _f_measure(lcs_length(pred, ref), len(pred), len(ref))


def token_f1(pred: Sequence[str], ref: Sequence[str]) -> float:
    """Harmonic mean of multiset-overlap precision and recall."""
    if not pred or not ref:
        return 0.0
    overlap = sum((Counter(pred) & Counter(ref)).values())
    return _f_measure(overlap, len(pred), len(ref))
