"""Synthetic desk-scale corpus: rendered bill text with parameterized
blur/contrast degradation.

Exists so the benchmark and its acceptance checks run without any real
dataset: images are receipt-like text bitmaps whose degradation level steers
them into the HIGH/MEDIUM/LOW routing tiers.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from ..image import GrayImage, save_pgm
from ..ops import gaussian_blur

__all__ = ["render_bill", "degrade", "training_patches", "eval_corpus", "write_corpus"]

_ITEMS = (
    "MILK", "BREAD", "SUGAR", "RICE", "SOAP", "TEA", "OIL", "SALT",
    "EGGS", "FLOUR", "JUICE", "BUTTER",
)


def _bill_lines(rng: np.random.Generator) -> list[str]:
    lines = [
        "STORE NO %02d" % rng.integers(1, 99),
        "RECEIPT %04d" % rng.integers(1, 9999),
        "DATE 2023-%02d-%02d" % (rng.integers(1, 13), rng.integers(1, 29)),
    ]
    subtotal = 0.0
    for _ in range(int(rng.integers(2, 5))):
        item = _ITEMS[int(rng.integers(0, len(_ITEMS)))]
        price = float(rng.integers(100, 5000)) / 100.0
        subtotal += price
        lines.append(f"{item} {price:.2f}")
    lines.append(f"SUBTOTAL {subtotal:.2f}")
    if rng.random() < 0.5:
        lines.append("DISCOUNT 5%")
        subtotal *= 0.95
    lines.append(f"TOTAL Rs. {subtotal:.2f}")
    return lines


def render_bill(
    seed: int,
    size: tuple[int, int] = (128, 112),
    foreground: int = 8,
    background: int = 252,
) -> GrayImage:
    """Render a receipt-like text bitmap (dark text on a light ground)."""
    height, width = size
    rng = np.random.default_rng(seed)
    canvas = Image.new("L", (width, height), color=background)
    draw = ImageDraw.Draw(canvas)
    font = ImageFont.load_default()
    y = 2
    for line in _bill_lines(rng):
        if y >= height - 10:
            break
        draw.text((3, y), line, fill=foreground, font=font)
        y += 12
    return GrayImage(np.asarray(canvas, dtype=np.float64))


def degrade(
    img: GrayImage,
    blur_sigma: float = 1.0,
    contrast: float = 1.0,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> GrayImage:
    """Blur, flatten contrast toward mid-gray and add Gaussian noise."""
    pixels = img.pixels
    if contrast != 1.0:
        pixels = 127.5 + contrast * (pixels - 127.5)
    out = GrayImage(np.clip(pixels, 0.0, 255.0))
    if blur_sigma > 0:
        out = gaussian_blur(out, 3, blur_sigma)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noisy = out.pixels + rng.normal(0.0, noise_sigma, size=out.pixels.shape)
        out = GrayImage(np.clip(noisy, 0.0, 255.0))
    return out


def training_patches(count: int = 32, patch: int = 64, seed: int = 0) -> list[GrayImage]:
    """Clean text patches for self-supervised training; skips near-blank crops."""
    patches: list[GrayImage] = []
    bill_seed = seed
    while len(patches) < count:
        bill = render_bill(bill_seed, size=(patch * 2, patch * 2))
        bill_seed += 1
        for y in range(0, bill.height - patch + 1, patch):
            for x in range(0, bill.width - patch + 1, patch):
                crop = GrayImage(bill.pixels[y : y + patch, x : x + patch])
                if float(crop.pixels.std()) > 20.0:
                    patches.append(crop)
                if len(patches) == count:
                    return patches
    return patches


def eval_corpus(count: int = 20, seed: int = 100, size: tuple[int, int] = (128, 112)) -> list[tuple[str, GrayImage]]:
    """Clean bills for enhancement evaluation, id-ordered."""
    return [(f"bill_{i:03d}", render_bill(seed + i, size=size)) for i in range(count)]


# Degradation presets cycling HIGH / MEDIUM / LOW routing behavior.
_PRESETS = (
    {"blur_sigma": 0.0, "contrast": 1.0, "noise_sigma": 0.0},
    {"blur_sigma": 1.0, "contrast": 0.8, "noise_sigma": 2.0},
    {"blur_sigma": 1.6, "contrast": 0.45, "noise_sigma": 4.0},
)


def write_corpus(
    out_dir: str | Path,
    count: int = 12,
    seed: int = 7,
    size: tuple[int, int] = (128, 112),
    keep_clean: bool = True,
) -> list[Path]:
    """Emit a degraded PGM corpus (and clean references) for bench/train runs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clean_dir = out_dir / "clean"
    if keep_clean:
        clean_dir.mkdir(exist_ok=True)
    written = []
    for i in range(count):
        clean = render_bill(seed + i, size=size)
        preset = _PRESETS[i % len(_PRESETS)]
        degraded = degrade(clean, seed=seed + i, **preset)
        path = out_dir / f"bill_{i:03d}.pgm"
        save_pgm(degraded, path)
        written.append(path)
        if keep_clean:
            save_pgm(clean, clean_dir / f"bill_{i:03d}.pgm")
    return written
