"""Pseudo ground truth by token-level majority voting over three OCR outputs.

The three token sequences are star-aligned: the center is the sequence with
the smallest summed pairwise edit distance (ties broken by engine priority
order), the other two are aligned to it by dynamic programming, and the two
pairwise alignments are merged on center positions. Insertion runs that land
at the same center anchor are zipped together so concurrent insertions share
columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .distance import edit_distance
from .ocr import OcrResult
from .postcorrect import clean_text

__all__ = ["GAP", "AlignedColumn", "PseudoGroundTruth", "align_star", "majority_vote", "build_pseudo_gt"]

# A gap slot in an aligned column.
GAP = None

AlignedColumn = tuple[Optional[str], Optional[str], Optional[str]]


@dataclass(frozen=True)
class PseudoGroundTruth:
    tokens: tuple[str, ...]
    agreement: float  # fraction of columns with a >= 2 identical non-gap majority
    engine_ids: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def _align_to_center(center: Sequence[str], other: Sequence[str]) -> list[tuple[Optional[str], Optional[str]]]:
    """Minimal-cost token alignment of `other` against `center`.

    Unit costs: match 0, substitute 1, gap 1. Traceback prefers pairing over
    gaps so cost-equal alignments resolve the same way every run.
    """
    n, m = len(center), len(other)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dp[i][0] = i
    for j in range(m + 1):
        dp[0][j] = j
    for i in range(1, n + 1):
        ci = center[i - 1]
        for j in range(1, m + 1):
            dp[i][j] = min(
                dp[i - 1][j - 1] + (ci != other[j - 1]),
                dp[i - 1][j] + 1,
                dp[i][j - 1] + 1,
            )
    pairs: list[tuple[Optional[str], Optional[str]]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dp[i][j] == dp[i - 1][j - 1] + (center[i - 1] != other[j - 1]):
            pairs.append((center[i - 1], other[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and dp[i][j] == dp[i - 1][j] + 1:
            pairs.append((center[i - 1], GAP))
            i -= 1
        else:
            pairs.append((GAP, other[j - 1]))
            j -= 1
    pairs.reverse()
    return pairs


def _star_align_with_center(
    a: Sequence[str], b: Sequence[str], c: Sequence[str]
) -> tuple[list[AlignedColumn], int]:
    """Star alignment plus the chosen center index."""
    seqs = (tuple(a), tuple(b), tuple(c))
    sums = [
        sum(edit_distance(seqs[i], seqs[j]) for j in range(3) if j != i) for i in range(3)
    ]
    center_idx = min(range(3), key=lambda i: (sums[i], i))
    others = [i for i in range(3) if i != center_idx]
    center = seqs[center_idx]

    # Per leaf: token matched to each center position, and the run of tokens
    # inserted after each center position (anchor len(center) means "before
    # everything" is anchor 0 ... no, anchor i holds insertions after token i).
    matched = {o: [GAP] * len(center) for o in others}
    inserted = {o: [[] for _ in range(len(center) + 1)] for o in others}
    for o in others:
        pos = 0
        for center_tok, other_tok in _align_to_center(center, seqs[o]):
            if center_tok is GAP:
                inserted[o][pos].append(other_tok)
            else:
                matched[o][pos] = other_tok
                pos += 1

    columns: list[AlignedColumn] = []
    o1, o2 = others

    def emit_insertions(anchor: int) -> None:
        run1, run2 = inserted[o1][anchor], inserted[o2][anchor]
        for k in range(max(len(run1), len(run2))):
            slots: list[Optional[str]] = [GAP, GAP, GAP]
            if k < len(run1):
                slots[o1] = run1[k]
            if k < len(run2):
                slots[o2] = run2[k]
            columns.append((slots[0], slots[1], slots[2]))

    emit_insertions(0)
    for pos, center_tok in enumerate(center):
        slots = [GAP, GAP, GAP]
        slots[center_idx] = center_tok
        slots[o1] = matched[o1][pos]
        slots[o2] = matched[o2][pos]
        columns.append((slots[0], slots[1], slots[2]))
        emit_insertions(pos + 1)
    return columns, center_idx


def align_star(a: Sequence[str], b: Sequence[str], c: Sequence[str]) -> list[AlignedColumn]:
    """Align three token sequences into columns of three slots (token or GAP)."""
    return _star_align_with_center(a, b, c)[0]


def majority_vote(column: AlignedColumn) -> Optional[str]:
    """Resolve one column to a token, or None to drop it.

    Two identical non-gap slots win outright; two or more gaps drop the
    column; three distinct tokens keep the one closest (summed edit distance)
    to the other two, ties to engine priority order.
    """
    tokens = [t for t in column if t is not GAP]
    if len(tokens) < 2:
        return None
    for i, t in enumerate(tokens):
        if t in tokens[i + 1 :]:
            return t
    # all present tokens distinct
    best = min(
        range(len(tokens)),
        key=lambda i: (sum(edit_distance(tokens[i], t) for t in tokens), i),
    )
    return tokens[best]


def _tokenize(result: OcrResult) -> tuple[str, ...]:
    return tuple(clean_text(result.text).split())


def build_pseudo_gt(results: Sequence[OcrResult]) -> PseudoGroundTruth:
    """Vote three engine outputs into a pseudo reference transcription.

    Inputs are the raw engine outputs (no post-correction) so the evaluated
    pipeline's correction rules cannot leak into the reference.
    """
    if len(results) != 3:
        raise ValueError(f"expected exactly 3 OCR results, got {len(results)}")
    sequences = [_tokenize(r) for r in results]
    columns = align_star(*sequences)
    voted = [majority_vote(col) for col in columns]
    tokens = tuple(t for t in voted if t is not None)
    if columns:
        agreeing = sum(
            1
            for col in columns
            if any(
                col[i] is not GAP and col[i] == col[j]
                for i in range(3)
                for j in range(i + 1, 3)
            )
        )
        agreement = agreeing / len(columns)
    else:
        agreement = 1.0  # vacuous: nothing to disagree on
    return PseudoGroundTruth(
        tokens=tokens,
        agreement=agreement,
        engine_ids=tuple(r.engine_id for r in results),
    )
