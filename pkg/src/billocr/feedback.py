"""Confidence-driven adaptive retry loop with progressive sharpening.

Attempt 1 runs on the image as given; attempt k reruns OCR on the original
image sharpened k-1 times. The loop stops as soon as the mean confidence
reaches the threshold and keeps the best attempt overall.
"""
from __future__ import annotations

from dataclasses import dataclass

from .image import GrayImage
from .ocr import EngineError, EngineSpec, OcrResult, recognize
from .ops import sharpen

__all__ = ["FeedbackConfig", "AttemptRecord", "AttemptLog", "progressive_sharpen", "run_with_retries"]


@dataclass(frozen=True)
class FeedbackConfig:
    threshold: float = 70.0  # percent
    max_attempts: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 100.0:
            raise ValueError(f"threshold {self.threshold} outside [0, 100]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    sharpen_passes: int
    mean_confidence: float
    token_count: int


@dataclass(frozen=True)
class AttemptLog:
    attempts: tuple[AttemptRecord, ...]
    chosen_attempt: int


def progressive_sharpen(img: GrayImage, attempt: int) -> GrayImage:
    """Image for retry `attempt`: the original sharpened attempt-1 times."""
    if attempt < 2:
        raise ValueError(f"retries start at attempt 2, got {attempt}")
    out = img
    for _ in range(attempt - 1):
        out = sharpen(out)
    return out


def run_with_retries(
    img: GrayImage, engine: EngineSpec, cfg: FeedbackConfig | None = None
) -> tuple[OcrResult, AttemptLog]:
    """OCR with up to `max_attempts` passes, sharpening between attempts.

    Returns the attempt with the highest mean confidence; ties go to the
    earliest attempt. Engine errors propagate with the attempt number attached.
    """
    cfg = cfg or FeedbackConfig()
    results: list[OcrResult] = []
    records: list[AttemptRecord] = []
    for attempt in range(1, cfg.max_attempts + 1):
        attempt_img = img if attempt == 1 else progressive_sharpen(img, attempt)
        try:
            result = recognize(engine, attempt_img, invocation=attempt - 1)
        except EngineError as exc:
            raise type(exc)(f"attempt {attempt}/{cfg.max_attempts}: {exc}") from exc
        results.append(result)
        records.append(
            AttemptRecord(
                attempt=attempt,
                sharpen_passes=attempt - 1,
                mean_confidence=result.mean_confidence,
                token_count=len(result.tokens),
            )
        )
        if result.mean_confidence >= cfg.threshold:
            break
    best = max(range(len(results)), key=lambda i: (results[i].mean_confidence, -i))
    return results[best], AttemptLog(attempts=tuple(records), chosen_attempt=best + 1)
