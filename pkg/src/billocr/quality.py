"""Three-tier quality routing from the Laplacian blur score."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .image import GrayImage
from .ops import laplacian_variance

__all__ = [
    "QualityTier",
    "EnhancementPlan",
    "QualityAssessment",
    "classify_tier",
    "plan_enhancement",
    "assess",
    "HIGH_THRESHOLD",
    "LOW_THRESHOLD",
]

HIGH_THRESHOLD = 500.0
LOW_THRESHOLD = 150.0


class QualityTier(Enum):
    HIGH = "HIGH"
    MEDIUM = "MEDIUM"
    LOW = "LOW"


@dataclass(frozen=True)
class EnhancementPlan:
    cnn_passes: int
    apply_sharpen: bool
    apply_clahe_post: bool


_PLANS = {
    QualityTier.HIGH: EnhancementPlan(0, False, False),
    QualityTier.MEDIUM: EnhancementPlan(1, False, True),
    QualityTier.LOW: EnhancementPlan(1, True, True),
}


@dataclass(frozen=True)
class QualityAssessment:
    variance: float
    tier: QualityTier
    plan: EnhancementPlan


def classify_tier(
    variance: float, high: float = HIGH_THRESHOLD, low: float = LOW_THRESHOLD
) -> QualityTier:
    """Map a blur score to a tier with strict boundaries: HIGH above `high`,
    LOW at or below `low`, MEDIUM in between."""
    if variance < 0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    if variance > high:
        return QualityTier.HIGH
    if variance > low:
        return QualityTier.MEDIUM
    return QualityTier.LOW


def plan_enhancement(tier: QualityTier) -> EnhancementPlan:
    """HIGH bypasses enhancement; MEDIUM gets one pass plus CLAHE; LOW adds sharpening."""
    return _PLANS[tier]


def assess(
    img: GrayImage, high: float = HIGH_THRESHOLD, low: float = LOW_THRESHOLD
) -> QualityAssessment:
    """Score, classify and plan in one step."""
    variance = laplacian_variance(img)
    tier = classify_tier(variance, high=high, low=low)
    return QualityAssessment(variance=variance, tier=tier, plan=plan_enhancement(tier))
