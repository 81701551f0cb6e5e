"""Data model for OCR pages and QA records, plus ingestion from OCR JSON.

The canonical OCR schema accepted (and emitted) by this package is::

    {"page_id": str, "width"?: number, "height"?: number,
     "segments": [{"text": str, "bbox": [x0, y0, x1, y1]}, ...]}

Azure Read output (``analyzeResult.readResults``) is converted to the same
structure by taking the axis-aligned hull of each line or word polygon.

Ingestion enforces the segment invariants: multi-line blocks are split into
one segment per line (each line gets an equal vertical slice of the block
box), texts are stripped of surrounding whitespace, empty texts are dropped
with a counted warning, and degenerate boxes are repaired.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import ParseError, RecordError

OCR_FORMATS = ("canonical", "azure_read")
GRANULARITIES = ("line", "word")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in image space; y grows downward."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for name in ("x0", "y0", "x1", "y1"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"bbox.{name} must be a finite number, got {value!r}")
            if value < 0:
                raise ValueError(f"bbox.{name} must be >= 0, got {value!r}")
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"bbox corners out of order: {self.as_list()}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def y_center(self) -> float:
        return (self.y0 + self.y1) / 2

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    def scaled(self, factor: float) -> "BBox":
        return BBox(self.x0 * factor, self.y0 * factor, self.x1 * factor, self.y1 * factor)


@dataclass(frozen=True)
class TextSegment:
    """One OCR text span with its bounding box. Always single-line."""

    text: str
    bbox: BBox

    def __post_init__(self):
        if not self.text:
            raise ValueError("segment text must be non-empty")
        if "\n" in self.text or "\r" in self.text:
            raise ValueError("segment text must not contain line breaks")
        if not self.text.strip():
            raise ValueError("segment text must not be all whitespace")


@dataclass(frozen=True)
class OcrPage:
    """An ordered collection of text segments for one page."""

    page_id: str
    segments: tuple[TextSegment, ...]
    width: float | None = None
    height: float | None = None
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        if self.width is not None or self.height is not None:
            max_x = self.width if self.width is not None else math.inf
            max_y = self.height if self.height is not None else math.inf
            for seg in self.segments:
                if seg.bbox.x1 > max_x or seg.bbox.y1 > max_y:
                    raise ValueError(
                        f"segment box {seg.bbox.as_list()} exceeds page bounds "
                        f"({self.width} x {self.height})"
                    )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"page_id": self.page_id}
        if self.width is not None:
            out["width"] = self.width
        if self.height is not None:
            out["height"] = self.height
        out["segments"] = [
            {"text": seg.text, "bbox": seg.bbox.as_list()} for seg in self.segments
        ]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


@dataclass(frozen=True)
class QARecord:
    """One question with the page(s) it is asked on and its gold answers.

    ``gold_answers`` may be empty for unlabeled test data; such records are
    excluded from scoring.
    """

    question_id: str
    question: str
    page_ids: tuple[str, ...]
    gold_answers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "page_ids", tuple(self.page_ids))
        object.__setattr__(self, "gold_answers", tuple(self.gold_answers))
        if not self.question_id:
            raise ValueError("question_id must be non-empty")
        if not self.question:
            raise ValueError("question must be non-empty")
        if not self.page_ids:
            raise ValueError(f"question {self.question_id!r} has no page_ids")


def parse_ocr(
    raw: bytes | str,
    format_tag: str = "canonical",
    *,
    granularity: str = "line",
    page_id: str | None = None,
) -> OcrPage:
    """Parse OCR JSON bytes into an :class:`OcrPage`.

    ``format_tag`` selects the input schema (``canonical`` or ``azure_read``);
    ``granularity`` selects line- or word-level segments. Azure word boxes are
    taken from the word polygons; canonical input has no word boxes, so word
    granularity slices each line box horizontally in proportion to character
    offsets.

    Repairs and skips are counted in ``OcrPage.warnings``.
    """
    if format_tag not in OCR_FORMATS:
        raise ValueError(f"unknown OCR format {format_tag!r}; expected one of {OCR_FORMATS}")
    if granularity not in GRANULARITIES:
        raise ValueError(f"unknown granularity {granularity!r}; expected one of {GRANULARITIES}")
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc

    if format_tag == "canonical":
        pid, width, height, entries = _canonical_entries(data)
        slice_words = granularity == "word"
    else:
        pid, width, height, entries = _azure_entries(data, granularity)
        slice_words = False

    if page_id is not None:
        pid = page_id

    warnings: list[str] = []
    segments: list[TextSegment] = []
    for idx, (block_text, box) in enumerate(entries):
        bbox = _sanitize_bbox(box, idx, width, height, warnings)
        segments.extend(_segments_from_block(block_text, bbox, idx, slice_words, warnings))
    return OcrPage(page_id=pid, segments=tuple(segments), width=width, height=height,
                   warnings=tuple(warnings))


def load_qa(raw: bytes | str) -> list[QARecord]:
    """Load QA records from a JSON array or JSONL stream.

    Record schema: ``{question_id, question, page_ids, gold_answers?}``.
    """
    text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    objs = _decode_records(text)
    records: list[QARecord] = []
    seen: set[str] = set()
    for idx, obj in enumerate(objs):
        if not isinstance(obj, dict):
            raise RecordError(f"record {idx}: expected an object, got {type(obj).__name__}")
        if "question" not in obj or not obj["question"]:
            raise RecordError(f"record {idx}: missing 'question'")
        if "question_id" not in obj or not obj["question_id"]:
            raise RecordError(f"record {idx}: missing 'question_id'")
        qid = str(obj["question_id"])
        if qid in seen:
            raise RecordError(f"duplicate question_id {qid!r}")
        seen.add(qid)
        page_ids = obj.get("page_ids") or []
        if not page_ids:
            raise RecordError(f"record {idx} ({qid}): 'page_ids' must be a non-empty list")
        golds = obj.get("gold_answers") or []
        try:
            records.append(QARecord(
                question_id=qid,
                question=str(obj["question"]),
                page_ids=tuple(str(p) for p in page_ids),
                gold_answers=tuple(str(g) for g in golds),
            ))
        except ValueError as exc:
            raise RecordError(f"record {idx} ({qid}): {exc}") from exc
    return records


# --- ingestion internals ---

def _decode_records(text: str) -> list[Any]:
    stripped = text.lstrip()
    if stripped.startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc
        return list(data)
    objs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            objs.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSONL on line {lineno}: {exc.msg}") from exc
    return objs


def _canonical_entries(data: Any):
    if not isinstance(data, dict) or not isinstance(data.get("segments"), list):
        raise ParseError("canonical OCR input must be an object with a 'segments' list")
    pid = str(data.get("page_id", ""))
    width = data.get("width")
    height = data.get("height")
    entries = []
    for seg in data["segments"]:
        if not isinstance(seg, dict):
            raise ParseError(f"segment entries must be objects, got {type(seg).__name__}")
        entries.append((str(seg.get("text", "")), seg.get("bbox")))
    return pid, width, height, entries


def _azure_entries(data: Any, granularity: str):
    result = data.get("analyzeResult", data) if isinstance(data, dict) else None
    pages = result.get("readResults") if isinstance(result, dict) else None
    if not pages:
        raise ParseError("azure_read input has no 'readResults'")
    first = pages[0]
    pid = f"page-{first.get('page', 1)}"
    width = first.get("width")
    height = first.get("height")
    entries = []
    for line in first.get("lines", []):
        if granularity == "word" and line.get("words"):
            for word in line["words"]:
                entries.append((str(word.get("text", "")), _polygon_hull(word.get("boundingBox"))))
        else:
            entries.append((str(line.get("text", "")), _polygon_hull(line.get("boundingBox"))))
    return pid, width, height, entries


def _polygon_hull(poly: Any) -> list[float] | None:
    """Axis-aligned hull [x0, y0, x1, y1] of a flat polygon [x1,y1,x2,y2,...]."""
    if not isinstance(poly, (list, tuple)) or len(poly) < 4 or len(poly) % 2:
        return None
    xs = poly[0::2]
    ys = poly[1::2]
    return [min(xs), min(ys), max(xs), max(ys)]


def _sanitize_bbox(box: Any, idx: int, width, height, warnings: list[str]) -> BBox:
    if not isinstance(box, (list, tuple)) or len(box) != 4:
        raise ParseError(f"segment {idx}: bbox must be [x0, y0, x1, y1], got {box!r}")
    try:
        x0, y0, x1, y1 = (float(v) for v in box)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"segment {idx}: non-numeric bbox {box!r}") from exc
    for v in (x0, y0, x1, y1):
        if not math.isfinite(v):
            raise ParseError(f"segment {idx}: non-finite bbox coordinate in {box!r}")
    if x0 > x1:
        x0, x1 = x1, x0
        warnings.append(f"segment {idx}: swapped x0/x1")
    if y0 > y1:
        y0, y1 = y1, y0
        warnings.append(f"segment {idx}: swapped y0/y1")
    if min(x0, y0) < 0:
        warnings.append(f"segment {idx}: clamped negative coordinates")
        x0, y0 = max(x0, 0.0), max(y0, 0.0)
        x1, y1 = max(x1, 0.0), max(y1, 0.0)
    if width is not None:
        x0, x1 = min(x0, width), min(x1, width)
    if height is not None:
        y0, y1 = min(y0, height), min(y1, height)
    return BBox(x0, y0, x1, y1)


def _segments_from_block(
    text: str, bbox: BBox, idx: int, slice_words: bool, warnings: list[str]
) -> Iterable[TextSegment]:
    if not text.strip():
        warnings.append(f"segment {idx}: empty text skipped")
        return []
    lines = text.splitlines() or [text]
    n = len(lines)
    out: list[TextSegment] = []
    for j, line in enumerate(lines):
        line = line.strip()
        if not line:
            warnings.append(f"segment {idx}: blank line {j} skipped")
            continue
        # each line of a multi-line block gets an equal vertical slice
        top = bbox.y0 + bbox.height * j / n
        bottom = bbox.y0 + bbox.height * (j + 1) / n
        line_box = BBox(bbox.x0, top, bbox.x1, bottom)
        if slice_words:
            out.extend(_word_slices(line, line_box))
        else:
            out.append(TextSegment(line, line_box))
    return out


def _word_slices(line: str, bbox: BBox) -> list[TextSegment]:
    """Split a line into words, slicing the box by character offsets."""
    words = line.split()
    if len(words) == 1:
        return [TextSegment(words[0], bbox)]
    joined = " ".join(words)
    total = len(joined)
    out = []
    offset = 0
    for word in words:
        x0 = bbox.x0 + bbox.width * offset / total
        x1 = bbox.x0 + bbox.width * (offset + len(word)) / total
        out.append(TextSegment(word, BBox(x0, bbox.y0, x1, bbox.y1)))
        offset += len(word) + 1
    return out
