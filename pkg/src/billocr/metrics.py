"""The seven evaluation metrics, per image and aggregated.

CER and WER normalize whitespace on both sides before scoring so formatting
differences do not dominate; PSNR aggregation averages finite values only and
reports how many images contributed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .distance import edit_distance
from .image import PsnrValue
from .postcorrect import clean_text
from .quality import QualityTier

__all__ = [
    "EmptyReferenceError",
    "edit_distance",
    "cer",
    "wer",
    "noise_ratio",
    "text_density",
    "FieldPattern",
    "FieldPatternSet",
    "default_field_patterns",
    "field_extraction_rate",
    "MetricsRecord",
    "AggregateRow",
    "aggregate",
]


class EmptyReferenceError(ValueError):
    """Raised when an error rate is requested against an empty reference."""


def _normalize(text: str) -> str:
    """clean_text plus newline folding: any whitespace run becomes one space."""
    return re.sub(r"\s+", " ", clean_text(text)).strip()


def cer(hypothesis: str, reference: str) -> float:
    """Character error rate against the reference, whitespace-normalized."""
    ref = _normalize(reference)
    if not ref:
        raise EmptyReferenceError("CER needs a non-empty reference")
    return edit_distance(_normalize(hypothesis), ref) / len(ref)


def wer(hypothesis: str, reference: str) -> float:
    """Word error rate over whitespace tokens."""
    ref_tokens = _normalize(reference).split()
    if not ref_tokens:
        raise EmptyReferenceError("WER needs a reference with at least one token")
    return edit_distance(_normalize(hypothesis).split(), ref_tokens) / len(ref_tokens)


# Characters a clean retail bill is allowed to contain besides letters,
# digits and whitespace.
_ALLOWED_PUNCT = set(".,:;/\\-()%$&@#*'\"+=")


def noise_ratio(text: str) -> float:
    """Fraction of characters outside the allowed retail-text alphabet."""
    if not text:
        return 0.0
    noisy = sum(
        1
        for ch in text
        if not (ch.isalpha() or ch.isdigit() or ch.isspace() or ch in _ALLOWED_PUNCT)
    )
    return noisy / len(text)


def text_density(text: str) -> int:
    """Number of whitespace tokens in the final text."""
    return len(text.split())


@dataclass(frozen=True)
class FieldPattern:
    name: str
    pattern: re.Pattern


@dataclass(frozen=True)
class FieldPatternSet:
    """Exactly five named field detectors."""

    fields: tuple[FieldPattern, ...]

    def __post_init__(self) -> None:
        if len(self.fields) != 5:
            raise ValueError(f"expected exactly 5 field detectors, got {len(self.fields)}")


def default_field_patterns() -> FieldPatternSet:
    """The five retail-bill fields: total amount, date, bill id, currency, discount."""
    return FieldPatternSet(
        fields=(
            FieldPattern("total_amount", re.compile(r"\b(?:sub\s?total|total)\b[^\n]*?\d", re.IGNORECASE)),
            FieldPattern(
                "date",
                re.compile(
                    r"\b\d{1,2}/\d{1,2}/\d{4}\b|\b\d{4}-\d{1,2}-\d{1,2}\b"
                    r"|\b\d{1,2}\.\d{1,2}\.\d{4}\b"
                    r"|\b\d{1,2}\s+(?:jan|feb|mar|apr|may|jun|jul|aug|sep|oct|nov|dec)[a-z]*\.?\s+\d{4}\b",
                    re.IGNORECASE,
                ),
            ),
            FieldPattern("bill_id", re.compile(r"\b(?:invoice|receipt)\b[^\n]*?\w*\d\w*", re.IGNORECASE)),
            FieldPattern("currency", re.compile(r"\b(?:RM|Rs\.?|INR|USD)\b")),
            FieldPattern("discount", re.compile(r"\bdiscount\b", re.IGNORECASE)),
        )
    )


def field_extraction_rate(text: str, fields: FieldPatternSet | None = None) -> float:
    """Fraction of the five field detectors that match anywhere in the text."""
    fields = fields or default_field_patterns()
    hits = sum(1 for f in fields.fields if f.pattern.search(text))
    return hits / len(fields.fields)


@dataclass(frozen=True)
class MetricsRecord:
    """Per-image metric values for one method run."""

    image_id: str
    cer: float
    wer: float
    mean_confidence: float
    psnr: PsnrValue
    field_extraction: float
    text_density: float
    noise_ratio: float
    elapsed: float
    tier: QualityTier


@dataclass(frozen=True)
class AggregateRow:
    """Arithmetic means across images; PSNR averaged over finite values only."""

    cer: float
    wer: float
    mean_confidence: float
    psnr_db: float | None
    psnr_n: int
    field_extraction: float
    text_density: float
    noise_ratio: float
    elapsed: float


def aggregate(records: Sequence[MetricsRecord]) -> AggregateRow:
    """Average a list of per-image records into one benchmark row."""
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    n = len(records)
    finite = [r.psnr.db for r in records if r.psnr.finite]
    return AggregateRow(
        cer=sum(r.cer for r in records) / n,
        wer=sum(r.wer for r in records) / n,
        mean_confidence=sum(r.mean_confidence for r in records) / n,
        psnr_db=sum(finite) / len(finite) if finite else None,
        psnr_n=len(finite),
        field_extraction=sum(r.field_extraction for r in records) / n,
        text_density=sum(r.text_density for r in records) / n,
        noise_ratio=sum(r.noise_ratio for r in records) / n,
        elapsed=sum(r.elapsed for r in records) / n,
    )
