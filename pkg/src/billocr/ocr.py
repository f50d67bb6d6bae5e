"""Engine-agnostic OCR invocation.

Three engine kinds: an external Tesseract adapter (TSV output), a generic
external command (one "confidence<TAB>text" line per token), and a
deterministic mock engine for hermetic tests and benchmarks. External engines
receive the image as a temporary PNG file and are run as one-shot
subprocesses.
"""
from __future__ import annotations

import hashlib
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .image import GrayImage, quantize, save_png
from .ops import laplacian_variance

__all__ = [
    "EngineError",
    "EngineUnavailableError",
    "EngineTimeoutError",
    "OutputParseError",
    "OcrToken",
    "OcrResult",
    "MockProfile",
    "EngineSpec",
    "parse_tesseract_tsv",
    "parse_simple_output",
    "mock_recognize",
    "recognize",
]

TESSERACT_FLAGS = ("--oem", "3", "--psm", "6")
DEFAULT_TIMEOUT = 60.0


class EngineError(Exception):
    """Base class for OCR engine failures."""


class EngineUnavailableError(EngineError):
    """The engine executable could not be resolved."""


class EngineTimeoutError(EngineError):
    """The engine did not finish within its timeout."""


class OutputParseError(EngineError):
    """The engine produced unusable output."""


@dataclass(frozen=True)
class OcrToken:
    text: str
    confidence: float  # percent, 0-100
    line_index: int
    word_index: int
    bbox: tuple[int, int, int, int]  # left, top, width, height

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("token text must be non-empty")
        if not 0.0 <= self.confidence <= 100.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 100]")


@dataclass(frozen=True)
class OcrResult:
    tokens: tuple[OcrToken, ...]
    mean_confidence: float
    engine_id: str
    elapsed: float

    @classmethod
    def from_tokens(cls, tokens: list[OcrToken], engine_id: str, elapsed: float) -> "OcrResult":
        ordered = tuple(sorted(tokens, key=lambda t: (t.line_index, t.word_index)))
        mean = sum(t.confidence for t in ordered) / len(ordered) if ordered else 0.0
        return cls(tokens=ordered, mean_confidence=mean, engine_id=engine_id, elapsed=elapsed)

    @property
    def text(self) -> str:
        """Tokens joined in reading order: spaces within a line, newlines between."""
        lines: dict[int, list[str]] = {}
        for tok in self.tokens:
            lines.setdefault(tok.line_index, []).append(tok.text)
        return "\n".join(" ".join(lines[k]) for k in sorted(lines))


@dataclass(frozen=True)
class MockProfile:
    """Behavior table for the mock engine.

    "variance" mode derives the confidence from the image's Laplacian
    variance (min(cap, variance / divisor)); "script" mode replays a fixed
    confidence sequence indexed by invocation number.
    """

    mode: str = "variance"
    cap: float = 95.0
    divisor: float = 10.0
    script: tuple[float, ...] = ()
    salt: str = ""

    def confidence(self, img: GrayImage, invocation: int) -> float:
        if self.mode == "script":
            if not self.script:
                raise ValueError("script profile needs at least one confidence")
            return self.script[min(invocation, len(self.script) - 1)]
        if self.mode == "variance":
            return min(self.cap, laplacian_variance(img) / self.divisor)
        raise ValueError(f"unknown mock profile mode {self.mode!r}")


@dataclass(frozen=True)
class EngineSpec:
    """How to invoke one OCR engine."""

    kind: str  # "external_tesseract" | "external_command" | "mock"
    command: str = "tesseract"
    args: tuple[str, ...] = ()
    timeout: float = DEFAULT_TIMEOUT
    engine_id: str = ""
    profile: MockProfile = field(default_factory=MockProfile)

    def resolved_id(self) -> str:
        return self.engine_id or {"external_tesseract": "tesseract", "mock": "mock"}.get(
            self.kind, Path(self.command).stem or "external"
        )


def parse_tesseract_tsv(tsv_text: str) -> list[OcrToken]:
    """Turn Tesseract's 12-column TSV into word tokens.

    Only level-5 rows with a non-negative confidence become tokens; layout
    rows (conf -1) are skipped. Lines are numbered by first appearance of
    their (page, block, paragraph, line) group.
    """
    lines = tsv_text.splitlines()
    if not lines or not lines[0].lower().startswith("level"):
        raise OutputParseError("missing TSV header row")
    tokens: list[OcrToken] = []
    line_ids: dict[tuple[str, str, str, str], int] = {}
    words_in_line: dict[int, int] = {}
    for row_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        cols = raw.split("\t")
        if len(cols) != 12:
            raise OutputParseError(f"row {row_no}: expected 12 columns, got {len(cols)}")
        try:
            level = int(cols[0])
            conf = float(cols[10])
        except ValueError as exc:
            raise OutputParseError(f"row {row_no}: {exc}") from exc
        if level != 5 or conf < 0:
            continue
        text = cols[11]
        if not text.strip():
            continue
        group = (cols[1], cols[2], cols[3], cols[4])
        line_index = line_ids.setdefault(group, len(line_ids))
        word_index = words_in_line.get(line_index, 0)
        words_in_line[line_index] = word_index + 1
        try:
            bbox = (int(cols[6]), int(cols[7]), int(cols[8]), int(cols[9]))
        except ValueError as exc:
            raise OutputParseError(f"row {row_no}: bad bbox: {exc}") from exc
        tokens.append(
            OcrToken(
                text=text.strip(),
                confidence=min(conf, 100.0),
                line_index=line_index,
                word_index=word_index,
                bbox=bbox,
            )
        )
    return tokens


def parse_simple_output(text: str) -> list[OcrToken]:
    """Parse the external_command contract: one "confidence<TAB>text" line per token."""
    tokens: list[OcrToken] = []
    for row_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        conf_str, sep, tok_text = raw.partition("\t")
        if not sep or not tok_text.strip():
            raise OutputParseError(f"line {row_no}: expected 'confidence<TAB>text'")
        try:
            conf = float(conf_str)
        except ValueError as exc:
            raise OutputParseError(f"line {row_no}: bad confidence {conf_str!r}") from exc
        if not 0.0 <= conf <= 100.0:
            raise OutputParseError(f"line {row_no}: confidence {conf} outside [0, 100]")
        tokens.append(
            OcrToken(
                text=tok_text.strip(),
                confidence=conf,
                line_index=row_no - 1,
                word_index=0,
                bbox=(0, 0, 0, 0),
            )
        )
    return tokens


_MOCK_VOCABULARY = (
    "RECEIPT", "INVOICE", "TOTAL", "SUBTOTAL", "DISCOUNT", "CASH", "CHANGE",
    "ITEM", "QTY", "PRICE", "Rs.", "12.50", "8.00", "45.00", "2023", "STORE",
    "THANK", "YOU", "TAX", "3.75",
)


def mock_recognize(img: GrayImage, profile: MockProfile, invocation: int = 0) -> OcrResult:
    """Deterministic fake recognition: tokens are a pure function of the
    image raster and profile; a uniform image yields no tokens."""
    raster = quantize(img.pixels)
    if raster.size == 0 or int(raster.max()) == int(raster.min()):
        return OcrResult.from_tokens([], engine_id="mock", elapsed=0.0)
    digest = hashlib.sha256(raster.tobytes() + profile.salt.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    conf = float(profile.confidence(img, invocation))
    n_tokens = int(3 + rng.integers(0, 6))
    tokens = []
    for i in range(n_tokens):
        word = _MOCK_VOCABULARY[int(rng.integers(0, len(_MOCK_VOCABULARY)))]
        line, col = divmod(i, 4)
        tokens.append(
            OcrToken(
                text=word,
                confidence=conf,
                line_index=line,
                word_index=col,
                bbox=(col * 60, line * 20, 50, 14),
            )
        )
    return OcrResult.from_tokens(tokens, engine_id="mock", elapsed=0.0)


def _resolve_executable(command: str) -> str:
    resolved = shutil.which(command)
    if resolved is None and Path(command).is_file():
        resolved = command
    if resolved is None:
        raise EngineUnavailableError(f"executable not found: {command!r}")
    return resolved


def recognize(engine: EngineSpec, img: GrayImage, invocation: int = 0) -> OcrResult:
    """Run one engine pass over the image.

    External engines read a temp PNG written from the in-memory raster; the
    mock engine never touches the filesystem. `invocation` only matters for
    scripted mock profiles.
    """
    if engine.kind == "mock":
        result = mock_recognize(img, engine.profile, invocation)
        return OcrResult(
            tokens=result.tokens,
            mean_confidence=result.mean_confidence,
            engine_id=engine.resolved_id(),
            elapsed=0.0,
        )
    if engine.kind not in ("external_tesseract", "external_command"):
        raise ValueError(f"unknown engine kind {engine.kind!r}")

    executable = _resolve_executable(engine.command)
    start = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="billocr-") as tmp:
        img_path = Path(tmp) / "page.png"
        save_png(img, img_path)
        if engine.kind == "external_tesseract":
            argv = [executable, str(img_path), "stdout", *TESSERACT_FLAGS, *engine.args, "tsv"]
        else:
            argv = [executable, str(img_path), *engine.args]
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=engine.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise EngineTimeoutError(
                f"{engine.resolved_id()} timed out after {engine.timeout}s"
            ) from exc
    elapsed = time.monotonic() - start
    if proc.returncode != 0:
        raise OutputParseError(
            f"{engine.resolved_id()} exited with {proc.returncode}: {proc.stderr.strip()[:200]}"
        )
    if engine.kind == "external_tesseract":
        tokens = parse_tesseract_tsv(proc.stdout)
    else:
        tokens = parse_simple_output(proc.stdout)
    return OcrResult.from_tokens(tokens, engine_id=engine.resolved_id(), elapsed=elapsed)
