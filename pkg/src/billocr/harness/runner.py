"""Benchmark orchestration: engines, pseudo-GT generation and method runs.

Four method variants share one dataset and one pseudo ground truth:

* raw_tesseract        - recognize only
* external_ocr         - the EasyOCR-substitute external command, if configured
* tesseract_preprocess - resize / denoise / threshold, then recognize
* proposed_pipeline    - quality routing, CNN enhancement, confidence retries,
                         rule-based post-correction
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..cnn import EnhanceModel, enhance, load_model
from ..ensemble import PseudoGroundTruth, build_pseudo_gt
from ..feedback import AttemptLog, FeedbackConfig, run_with_retries
from ..image import GrayImage, PsnrValue
from ..metrics import (
    EmptyReferenceError,
    MetricsRecord,
    cer,
    default_field_patterns,
    field_extraction_rate,
    noise_ratio,
    text_density,
    wer,
)
from ..ocr import EngineError, EngineSpec, EngineUnavailableError, MockProfile, OcrResult, recognize
from ..ops import adaptive_gaussian_threshold, nl_means_denoise, psnr, resize_min_side
from ..postcorrect import CorrectionRuleSet, correct, load_rules
from ..quality import QualityAssessment, assess
from .config import RunConfig
from .dataset import Dataset

__all__ = [
    "ImageRecord",
    "MethodRun",
    "base_engine",
    "external_engine",
    "classic_preprocess",
    "generate_gt",
    "save_gt",
    "load_gt",
    "run_method",
]

log = logging.getLogger(__name__)

PIPELINE_STAGES = ("ingest", "quality", "enhance", "ocr", "feedback", "postcorrect")


@dataclass(frozen=True)
class ImageRecord:
    """Everything the per-image JSON report carries for one method."""

    image_id: str
    metrics: MetricsRecord | None
    text: str
    variance: float
    agreement: float | None
    attempts: AttemptLog | None
    stages: tuple[str, ...]
    error: str | None = None


@dataclass
class MethodRun:
    method: str
    records: list[ImageRecord]
    skipped: bool = False

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if r.error is not None)

    @property
    def valid(self) -> bool:
        # more than half the images failing marks the run invalid
        return bool(self.records) and self.failures * 2 <= len(self.records)

    def good_metrics(self) -> list[MetricsRecord]:
        return [r.metrics for r in self.records if r.metrics is not None]


def base_engine(cfg: RunConfig, salt: str = "") -> EngineSpec:
    """The Tesseract-role engine: real Tesseract or the deterministic mock."""
    if cfg.engine == "mock":
        return EngineSpec(
            kind="mock",
            engine_id="mock" + (f"-{salt}" if salt else ""),
            profile=MockProfile(mode="variance", cap=cfg.mock_cap, divisor=cfg.mock_divisor, salt=salt),
        )
    if cfg.engine == "tesseract":
        return EngineSpec(
            kind="external_tesseract",
            command=cfg.tesseract_cmd,
            timeout=cfg.engine_timeout,
            engine_id="tesseract",
        )
    raise ValueError(f"unknown engine binding {cfg.engine!r}")


def external_engine(cfg: RunConfig) -> EngineSpec | None:
    """The EasyOCR-substitute engine, or None when not configured."""
    if not cfg.external_cmd:
        return None
    return EngineSpec(
        kind="external_command",
        command=cfg.external_cmd,
        timeout=cfg.engine_timeout,
        engine_id=Path(cfg.external_cmd).stem,
    )


def classic_preprocess(img: GrayImage, cfg: RunConfig) -> GrayImage:
    """The Tesseract+Preprocess baseline chain."""
    out = resize_min_side(img, cfg.min_side)
    out = nl_means_denoise(out, cfg.nlm_strength, cfg.nlm_template, cfg.nlm_search)
    return adaptive_gaussian_threshold(out, cfg.adaptive_block, cfg.adaptive_c)


def _load_pipeline_model(cfg: RunConfig) -> EnhanceModel:
    if not cfg.model_path:
        raise ValueError("proposed_pipeline needs model_path in the config")
    return load_model(cfg.model_path)


def _rules(cfg: RunConfig) -> CorrectionRuleSet:
    return load_rules(cfg.rules_path) if cfg.rules_path else CorrectionRuleSet()


def _pipeline_precorrection_result(
    img: GrayImage, assessment: QualityAssessment, engine: EngineSpec, cfg: RunConfig, model: EnhanceModel
) -> tuple[OcrResult, AttemptLog, GrayImage]:
    enhanced = enhance(model, img, assessment.plan, cfg.clahe_clip, (cfg.clahe_tile, cfg.clahe_tile))
    result, attempts = run_with_retries(
        enhanced, engine, FeedbackConfig(cfg.confidence_threshold, cfg.max_attempts)
    )
    return result, attempts, enhanced


def generate_gt(
    dataset: Dataset,
    cfg: RunConfig,
    assessments: dict[str, QualityAssessment] | None = None,
    model: EnhanceModel | None = None,
) -> dict[str, PseudoGroundTruth]:
    """Vote three engine outputs per image into a pseudo ground truth.

    The three voters are raw recognition, the external engine, and
    recognition after classical preprocessing. Without an external engine the
    third slot falls back to the proposed pipeline's pre-correction output,
    which is recorded in the sidecar via the engine id.
    """
    raw = base_engine(cfg)
    preproc = base_engine(cfg, salt="preprocess")
    external = external_engine(cfg)
    if external is None:
        if model is None:
            model = _load_pipeline_model(cfg)
        if assessments is None:
            assessments = {
                image_id: assess(img, cfg.high_threshold, cfg.low_threshold)
                for image_id, img in dataset.items
            }

    def one(item: tuple[str, GrayImage]) -> tuple[str, PseudoGroundTruth]:
        image_id, img = item
        first = recognize(raw, img)
        if external is not None:
            second = recognize(external, img)
        else:
            result, _, _ = _pipeline_precorrection_result(
                img, assessments[image_id], base_engine(cfg, salt="pipeline"), cfg, model
            )
            second = OcrResult(
                tokens=result.tokens,
                mean_confidence=result.mean_confidence,
                engine_id="pipeline-precorrection",
                elapsed=result.elapsed,
            )
        third = recognize(preproc, classic_preprocess(img, cfg))
        return image_id, build_pseudo_gt([first, second, third])

    return dict(_map_images(one, dataset, cfg.workers))


def save_gt(gt: dict[str, PseudoGroundTruth], gt_dir: str | Path) -> None:
    gt_dir = Path(gt_dir)
    gt_dir.mkdir(parents=True, exist_ok=True)
    for image_id, truth in gt.items():
        (gt_dir / f"{image_id}.gt.txt").write_text(truth.text + "\n", encoding="utf-8")
        sidecar = {"agreement": truth.agreement, "engine_ids": list(truth.engine_ids)}
        (gt_dir / f"{image_id}.gt.json").write_text(
            json.dumps(sidecar, sort_keys=True) + "\n", encoding="utf-8"
        )


def load_gt(gt_dir: str | Path) -> dict[str, PseudoGroundTruth]:
    gt_dir = Path(gt_dir)
    out: dict[str, PseudoGroundTruth] = {}
    for txt_path in sorted(gt_dir.glob("*.gt.txt")):
        image_id = txt_path.name[: -len(".gt.txt")]
        sidecar = json.loads((gt_dir / f"{image_id}.gt.json").read_text(encoding="utf-8"))
        tokens = tuple(txt_path.read_text(encoding="utf-8").split())
        out[image_id] = PseudoGroundTruth(
            tokens=tokens,
            agreement=float(sidecar["agreement"]),
            engine_ids=tuple(sidecar["engine_ids"]),
        )
    return out


def _map_images(fn, dataset: Dataset, workers: int):
    """Apply fn to every dataset item, optionally in parallel, in dataset order."""
    if workers <= 1:
        return [fn(item) for item in dataset.items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, dataset.items))


def run_method(
    method: str,
    dataset: Dataset,
    cfg: RunConfig,
    gt: dict[str, PseudoGroundTruth],
    assessments: dict[str, QualityAssessment],
    model: EnhanceModel | None = None,
) -> MethodRun:
    """Execute one method over the dataset and score it against the GT."""
    missing = [image_id for image_id, _ in dataset.items if image_id not in gt]
    if missing:
        raise ValueError(f"ground truth missing for {len(missing)} images, e.g. {missing[:3]}")

    if method == "external_ocr":
        engine: EngineSpec | None = external_engine(cfg)
        if engine is None:
            log.warning("external_ocr skipped: no external command configured")
            return MethodRun(method=method, records=[], skipped=True)
    else:
        engine = base_engine(cfg)

    if method == "proposed_pipeline" and model is None:
        model = _load_pipeline_model(cfg)
    rules = _rules(cfg)
    fields = default_field_patterns()

    def one(item: tuple[str, GrayImage]) -> ImageRecord:
        image_id, img = item
        assessment = assessments[image_id]
        stages: list[str] = ["ingest", "quality"]
        start = time.monotonic()
        attempts: AttemptLog | None = None
        try:
            if method == "proposed_pipeline":
                stages.append("enhance")
                result, attempts, enhanced = _pipeline_precorrection_result(
                    img, assessment, engine, cfg, model
                )
                stages.extend(["ocr", "feedback", "postcorrect"])
                final_text = correct(result.text, rules).text
                image_psnr = (
                    psnr(img, enhanced) if assessment.plan.cnn_passes >= 1 else PsnrValue.not_applicable()
                )
                engine_elapsed = result.elapsed * len(attempts.attempts)
            else:
                if method == "tesseract_preprocess":
                    ocr_input = classic_preprocess(img, cfg)
                else:
                    ocr_input = img
                stages.append("ocr")
                result = recognize(engine, ocr_input)
                final_text = result.text
                image_psnr = PsnrValue.not_applicable()
                engine_elapsed = result.elapsed
        except EngineError as exc:
            return ImageRecord(
                image_id=image_id,
                metrics=None,
                text="",
                variance=assessment.variance,
                agreement=gt[image_id].agreement,
                attempts=None,
                stages=tuple(stages),
                error=f"{type(exc).__name__}: {exc}",
            )

        truth = gt[image_id]
        if not truth.tokens:
            return ImageRecord(
                image_id=image_id,
                metrics=None,
                text=final_text,
                variance=assessment.variance,
                agreement=truth.agreement,
                attempts=attempts,
                stages=tuple(stages),
                error="empty ground truth",
            )
        elapsed = engine_elapsed if cfg.timing == "deterministic" else time.monotonic() - start
        try:
            record = MetricsRecord(
                image_id=image_id,
                cer=cer(final_text, truth.text),
                wer=wer(final_text, truth.text),
                mean_confidence=result.mean_confidence,
                psnr=image_psnr,
                field_extraction=field_extraction_rate(final_text, fields),
                text_density=float(text_density(final_text)),
                noise_ratio=noise_ratio(final_text),
                elapsed=elapsed,
                tier=assessment.tier,
            )
        except EmptyReferenceError as exc:
            return ImageRecord(
                image_id=image_id,
                metrics=None,
                text=final_text,
                variance=assessment.variance,
                agreement=truth.agreement,
                attempts=attempts,
                stages=tuple(stages),
                error=f"EmptyReferenceError: {exc}",
            )
        return ImageRecord(
            image_id=image_id,
            metrics=record,
            text=final_text,
            variance=assessment.variance,
            agreement=truth.agreement,
            attempts=attempts,
            stages=tuple(stages),
        )

    records = _map_images(one, dataset, cfg.workers)
    run = MethodRun(method=method, records=records)
    if not run.valid:
        log.warning("method %s marked invalid: %d/%d images failed", method, run.failures, len(records))
    return run
