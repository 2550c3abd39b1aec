"""MIAS ingestion: annotation parsing, labels, ground-truth circles.

The annotation file carries whitespace-separated records: id, tissue
code, abnormality code, then optionally severity and a lesion circle
(x, y, radius) whose y measures from the bottom-left corner. Rows are
converted to top-left indexing at parse time so every downstream mask
uses image coordinates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import read_pgm

TISSUE_CODES = {"F", "G", "D"}
ABNORMALITY_CODES = {"CALC", "CIRC", "SPIC", "MISC", "ARCH", "ASYM", "NORM"}
SEVERITY_CODES = {"B", "M"}

EXPECTED_TOTAL = 322
EXPECTED_ABNORMAL = 119


class InfoParseError(ValueError):
    """Raised for malformed annotation lines; carries the line number."""


@dataclass(frozen=True)
class MiasRecord:
    id: str
    tissue: str
    abnormality: str
    severity: str | None = None
    center: tuple[int, int] | None = None   # (x, y), bottom-left origin
    radius: int | None = None

    @property
    def abnormal(self) -> bool:
        return self.abnormality != "NORM"


@dataclass(frozen=True)
class LabeledImage:
    image: np.ndarray
    label: int                      # 1 = abnormal
    records: tuple[MiasRecord, ...]

    @property
    def id(self) -> str:
        return self.records[0].id


def parse_info(text: str) -> list[MiasRecord]:
    """Parse annotation text; multi-lesion images yield one record each."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if len(tokens) not in (3, 4, 7):
            raise InfoParseError(f"line {lineno}: expected 3, 4 or 7 fields, got {len(tokens)}")
        ident, tissue, abnormality = tokens[:3]
        if tissue not in TISSUE_CODES:
            raise InfoParseError(f"line {lineno}: unknown tissue code {tissue!r}")
        if abnormality not in ABNORMALITY_CODES:
            raise InfoParseError(f"line {lineno}: unknown abnormality code {abnormality!r}")
        severity = None
        center = None
        radius = None
        if len(tokens) >= 4:
            if abnormality == "NORM":
                raise InfoParseError(f"line {lineno}: normal record carries extra fields")
            severity = tokens[3]
            if severity not in SEVERITY_CODES:
                raise InfoParseError(f"line {lineno}: unknown severity code {severity!r}")
        if len(tokens) == 7:
            try:
                x, y, radius = (int(t) for t in tokens[4:7])
            except ValueError:
                raise InfoParseError(f"line {lineno}: non-integer lesion geometry") from None
            center = (x, y)
        records.append(MiasRecord(id=ident, tissue=tissue, abnormality=abnormality,
                                  severity=severity, center=center, radius=radius))
    return records


def ground_truth_mask(record: MiasRecord, dims: tuple[int, int]) -> np.ndarray:
    """Filled lesion circle in image coordinates (row = height - y)."""
    if record.center is None or record.radius is None:
        raise ValueError(f"record {record.id} has no lesion geometry")
    h, w = dims
    x, y = record.center
    row = h - y
    rr, cc = np.mgrid[0:h, 0:w]
    return (rr - row) ** 2 + (cc - x) ** 2 <= record.radius ** 2


def combined_ground_truth(item: LabeledImage) -> np.ndarray:
    """Union of the lesion circles of a (possibly multi-lesion) image."""
    h, w = item.image.shape
    mask = np.zeros((h, w), dtype=bool)
    for record in item.records:
        if record.center is not None:
            mask |= ground_truth_mask(record, (h, w))
    return mask


def load_dataset(image_dir, info_path) -> list[LabeledImage]:
    """Pair every annotated image with its records; one item per image."""
    image_dir = Path(image_dir)
    records = parse_info(Path(info_path).read_text())
    by_id: dict[str, list[MiasRecord]] = {}
    for record in records:
        by_id.setdefault(record.id, []).append(record)
    items = []
    for ident, recs in by_id.items():
        path = image_dir / f"{ident}.pgm"
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise OSError(f"missing image file for record {ident!r}: {exc}") from exc
        image = read_pgm(data)
        label = int(any(r.abnormal for r in recs))
        items.append(LabeledImage(image=image, label=label, records=tuple(recs)))
    abnormal = sum(item.label for item in items)
    if len(items) != EXPECTED_TOTAL or abnormal != EXPECTED_ABNORMAL:
        warnings.warn(
            f"dataset has {len(items)} images ({abnormal} abnormal); the full "
            f"archive carries {EXPECTED_TOTAL} ({EXPECTED_ABNORMAL} abnormal)",
            stacklevel=2)
    return items
