"""Levenshtein distance over characters or token sequences."""
from __future__ import annotations

from typing import Sequence

__all__ = ["edit_distance"]


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Minimal number of unit-cost insertions, deletions and substitutions.

    Works on strings (character level) and on token sequences (word level).
    """
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    if n > m:
        a, b, n, m = b, a, m, n
    prev = list(range(n + 1))
    cur = [0] * (n + 1)
    for i in range(1, m + 1):
        cur[0] = i
        bi = b[i - 1]
        for j in range(1, n + 1):
            cost = prev[j - 1] + (a[j - 1] != bi)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            cur[j] = cost if cost <= dele and cost <= ins else (dele if dele <= ins else ins)
        prev, cur = cur, prev
    return prev[n]
