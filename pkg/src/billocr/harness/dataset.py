"""Dataset ingestion: every .png/.pgm in a directory, in stable id order."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from ..image import GrayImage, load_image

__all__ = ["DatasetError", "Dataset", "ingest_dataset"]

log = logging.getLogger(__name__)


class DatasetError(Exception):
    """The dataset directory is unusable (missing or empty)."""


@dataclass(frozen=True)
class Dataset:
    items: tuple[tuple[str, GrayImage], ...]  # (image id, image), id-sorted
    skipped: int  # unreadable files

    def __len__(self) -> int:
        return len(self.items)


def ingest_dataset(directory: str | Path) -> Dataset:
    """Load all supported images, lexicographically ordered by file stem.

    Unreadable files are logged and counted, not fatal; an empty result is.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"dataset directory not found: {directory}")
    paths = sorted(
        (p for p in directory.iterdir() if p.suffix.lower() in (".png", ".pgm")),
        key=lambda p: p.stem,
    )
    items: list[tuple[str, GrayImage]] = []
    skipped = 0
    for path in paths:
        try:
            items.append((path.stem, load_image(path)))
        except Exception as exc:  # noqa: BLE001 - any unreadable file is skipped
            skipped += 1
            log.warning("skipping unreadable image %s: %s", path, exc)
    if not items:
        raise DatasetError(f"no readable images in {directory}")
    return Dataset(items=tuple(items), skipped=skipped)
