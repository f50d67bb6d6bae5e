"""Benchmark run configuration.

A single key=value file drives every run; each pipeline constant (quality
thresholds 500/150, confidence threshold 70, three attempts, CLAHE 2.0 and
8x8, learning rate 0.001, patience 5, minimum side 1000 px) is a named key
whose default is the published value.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

__all__ = ["RunConfig", "parse_config", "write_config"]

_METHODS = ("raw_tesseract", "external_ocr", "tesseract_preprocess", "proposed_pipeline")


@dataclass
class RunConfig:
    dataset_dir: str = ""
    output_dir: str = "out"
    gt_dir: str = ""  # empty: <output_dir>/gt
    model_path: str = ""
    rules_path: str = ""
    seed: int = 0
    workers: int = 1
    methods: tuple[str, ...] = ("raw_tesseract", "tesseract_preprocess", "proposed_pipeline")

    # engine bindings
    engine: str = "mock"  # "mock" | "tesseract"
    tesseract_cmd: str = "tesseract"
    external_cmd: str = ""  # EasyOCR stand-in executable; empty means unavailable
    engine_timeout: float = 60.0
    mock_cap: float = 95.0
    mock_divisor: float = 10.0

    # routing and feedback
    high_threshold: float = 500.0
    low_threshold: float = 150.0
    confidence_threshold: float = 70.0
    max_attempts: int = 3

    # operators
    clahe_clip: float = 2.0
    clahe_tile: int = 8
    min_side: int = 1000
    adaptive_block: int = 31
    adaptive_c: float = 10.0
    nlm_strength: float = 10.0
    nlm_template: int = 7
    nlm_search: int = 21

    # training
    learning_rate: float = 0.001
    patience: int = 5
    epochs: int = 50
    batch_size: int = 4
    patch_size: int = 64
    val_split: float = 0.1

    # "wall" measures wall-clock per image; "deterministic" sums engine
    # elapsed values so mock runs are byte-reproducible
    timing: str = "wall"

    def __post_init__(self) -> None:
        if self.high_threshold <= self.low_threshold:
            raise ValueError("high_threshold must exceed low_threshold")
        unknown = [m for m in self.methods if m not in _METHODS]
        if unknown:
            raise ValueError(f"unknown methods: {unknown}; valid: {_METHODS}")
        if self.timing not in ("wall", "deterministic"):
            raise ValueError(f"timing must be 'wall' or 'deterministic', got {self.timing!r}")

    def resolved_gt_dir(self) -> Path:
        return Path(self.gt_dir) if self.gt_dir else Path(self.output_dir) / "gt"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config(path: str | Path, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read a key=value file (hash comments allowed) into a RunConfig."""
    values: dict[str, object] = {}
    raw: dict[str, str] = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ValueError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
        raw[key.strip()] = value.strip()
    raw.update(overrides or {})
    for key, value in raw.items():
        if key not in _FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = _coerce(key, value)
    return RunConfig(**values)  # type: ignore[arg-type]


def _coerce(key: str, value: str) -> object:
    kind = _FIELD_TYPES[key]
    if kind in ("int", int):
        return int(value)
    if kind in ("float", float):
        return float(value)
    if key == "methods":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    return value


def write_config(cfg: RunConfig, path: str | Path) -> None:
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if f.name == "methods":
            value = ",".join(value)
        lines.append(f"{f.name}={value}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
