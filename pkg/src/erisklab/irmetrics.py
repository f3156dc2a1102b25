"""Binary-relevance ranking metrics (trec_eval conventions).

Every function takes ``rel``, the 0/1 relevance of the retrieved items in rank
order (rank 1 first), and ``n_relevant``, the number of relevant items in the
whole judgment set (retrieved or not).
"""
from __future__ import annotations

import math
from typing import Sequence


def precision_at_k(rel: Sequence[int], k: int) -> float:
    """Relevant items among the first k, divided by k (missing ranks count as misses).

    >>> precision_at_k([1, 0, 1], 2)
    0.5
    >>> precision_at_k([1], 10)
    0.1
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return sum(1 for r in rel[:k] if r) / k


def r_precision(rel: Sequence[int], n_relevant: int) -> float:
    """Precision at rank R, R being the total number of relevant items."""
    if n_relevant <= 0:
        return 0.0
    return precision_at_k(rel, n_relevant)


def average_precision(rel: Sequence[int], n_relevant: int) -> float:
    """Sum of precision at each relevant rank, divided by R.

    >>> round(average_precision([1, 0, 1], 2), 4)
    0.8333
    """
    if n_relevant <= 0:
        return 0.0
    hits = 0
    total = 0.0
    for i, r in enumerate(rel, start=1):
        if r:
            hits += 1
            total += hits / i
    return total / n_relevant


def dcg_at_k(rel: Sequence[int], k: int) -> float:
    return sum(1.0 / math.log2(i + 1) for i, r in enumerate(rel[:k], start=1) if r)


def ndcg_at_k(rel: Sequence[int], n_relevant: int, k: int) -> float:
    """DCG over the first k ranks normalized by the ideal ordering's DCG.

    The ideal ordering places min(R, k) relevant items at the top.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ideal = sum(1.0 / math.log2(i + 1) for i in range(1, min(n_relevant, k) + 1))
    if ideal == 0.0:
        return 0.0
    return dcg_at_k(rel, k) / ideal
