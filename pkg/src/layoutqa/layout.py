"""Rebuild the visual layout of an OCR page as plain text.

The reconstruction runs in five steps: order the segments by reading
position, cluster them into rows, estimate how many pixels one character
occupies from the row with the most characters, turn horizontal gaps into
runs of spaces, and join rows with line breaks. The output is a string whose
whitespace mirrors the geometry of the page.

Space counts use round-half-up, i.e. ``floor(x + 0.5)``. The ratio
``gap / char_width`` is evaluated as ``gap * row_chars / row_width`` in a
single division so that scaling every coordinate by a common factor leaves
the rendered text byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyDocument
from .ocr import OcrPage, TextSegment


@dataclass(frozen=True)
class LayoutConfig:
    """Rendering knobs.

    ``min_gap_spaces`` is the floor for the space run between adjacent
    segments (overlapping boxes clamp to it). ``leading_indent`` prefixes
    each line with the left-margin gap converted to spaces.
    ``row_overlap_threshold`` is the fraction of the smaller height that two
    boxes must overlap vertically to share a row. ``max_chars`` truncates the
    output by dropping whole trailing lines.
    """

    min_gap_spaces: int = 1
    leading_indent: bool = True
    row_overlap_threshold: float = 0.5
    max_chars: int | None = None

    def __post_init__(self):
        if self.min_gap_spaces < 1:
            raise ValueError("min_gap_spaces must be >= 1")
        if not 0 < self.row_overlap_threshold <= 1:
            raise ValueError("row_overlap_threshold must be in (0, 1]")
        if self.max_chars is not None and self.max_chars < 0:
            raise ValueError("max_chars must be >= 0")


@dataclass(frozen=True)
class Row:
    """A maximal group of vertically co-linear segments, left to right.

    ``char_count`` sums the non-space characters of the segment texts;
    ``width`` is the horizontal extent of the union of the boxes.
    """

    index: int
    segments: tuple[TextSegment, ...]
    char_count: int
    width: float
    y_span: tuple[float, float]


@dataclass(frozen=True)
class CharWidth:
    """Estimated pixels per character, taken from the row richest in text.

    ``row_width`` and ``row_chars`` keep the exact ratio so renderers can
    divide once instead of going through the rounded ``value``.
    """

    value: float
    source_row: int
    row_width: float
    row_chars: int


@dataclass(frozen=True)
class LayoutText:
    """The reconstructed page: rows joined by line breaks."""

    text: str
    rows_rendered: int
    truncated: bool = False


def sort_segments(page: OcrPage) -> list[TextSegment]:
    """Order segments top to bottom (by vertical center), then left to right.

    The sort is stable, so exact ties keep their input order.
    """
    if not page.segments:
        raise EmptyDocument(f"page {page.page_id!r} has no segments")
    return sorted(page.segments, key=lambda s: (s.bbox.y_center, s.bbox.x0))


def group_rows(ordered: Sequence[TextSegment], cfg: LayoutConfig | None = None) -> list[Row]:
    """Cluster reading-ordered segments into rows.

    A segment joins the current row when its vertical overlap with the row's
    span is at least ``row_overlap_threshold`` times the smaller of the two
    heights; otherwise it starts a new row. Row spans grow to the union of
    their members.
    """
    cfg = cfg or LayoutConfig()
    if not ordered:
        raise EmptyDocument("no segments to group")
    groups: list[list[TextSegment]] = []
    current = [ordered[0]]
    top, bottom = ordered[0].bbox.y0, ordered[0].bbox.y1
    for seg in ordered[1:]:
        overlap = min(seg.bbox.y1, bottom) - max(seg.bbox.y0, top)
        needed = cfg.row_overlap_threshold * min(seg.bbox.height, bottom - top)
        if overlap >= needed:
            current.append(seg)
            top = min(top, seg.bbox.y0)
            bottom = max(bottom, seg.bbox.y1)
        else:
            groups.append(current)
            current = [seg]
            top, bottom = seg.bbox.y0, seg.bbox.y1
    groups.append(current)
    return [_build_row(i, members) for i, members in enumerate(groups)]


def _build_row(index: int, members: list[TextSegment]) -> Row:
    ordered = sorted(members, key=lambda s: (s.bbox.x0, s.bbox.y0))
    chars = sum(_non_space_chars(s.text) for s in ordered)
    width = max(s.bbox.x1 for s in ordered) - min(s.bbox.x0 for s in ordered)
    y_span = (min(s.bbox.y0 for s in ordered), max(s.bbox.y1 for s in ordered))
    return Row(index=index, segments=tuple(ordered), char_count=chars, width=width, y_span=y_span)


def _non_space_chars(text: str) -> int:
    return len("".join(text.split()))


def estimate_char_width(rows: Sequence[Row]) -> CharWidth:
    """Pixels per character from the row with the maximum character count.

    Ties on the character count go to the earliest row. A zero-width winner
    falls back to the next row by character count; if every row has zero
    width, the estimate defaults to one pixel per character.
    """
    if not rows:
        raise EmptyDocument("no rows")
    by_density = sorted(rows, key=lambda r: (-r.char_count, r.index))
    for row in by_density:
        if row.width > 0:
            return CharWidth(
                value=row.width / row.char_count,
                source_row=row.index,
                row_width=row.width,
                row_chars=row.char_count,
            )
    return CharWidth(value=1.0, source_row=by_density[0].index, row_width=1.0, row_chars=1)


def render_row(
    row: Row,
    char_width: CharWidth,
    page_left: float,
    cfg: LayoutConfig | None = None,
) -> str:
    """Join a row's segments with proportional runs of spaces.

    The gap between adjacent boxes is ``x0(next) - x1(previous)``; it becomes
    ``max(min_gap_spaces, round(gap / char_width))`` spaces. With
    ``leading_indent`` the line starts with the left-margin gap in spaces.
    Trailing whitespace is stripped.
    """
    cfg = cfg or LayoutConfig()
    parts: list[str] = []
    if cfg.leading_indent:
        indent = _gap_to_spaces(row.segments[0].bbox.x0 - page_left, char_width)
        parts.append(" " * max(0, indent))
    previous = None
    for seg in row.segments:
        if previous is not None:
            gap = seg.bbox.x0 - previous.bbox.x1
            count = max(cfg.min_gap_spaces, _gap_to_spaces(gap, char_width))
            parts.append(" " * count)
        parts.append(seg.text)
        previous = seg
    return "".join(parts).rstrip()


def _gap_to_spaces(gap_px: float, cw: CharWidth) -> int:
    # single division of exactly representable products keeps the count
    # stable under uniform coordinate scaling
    return math.floor(gap_px * cw.row_chars / cw.row_width + 0.5)


def render_layout(page: OcrPage, cfg: LayoutConfig | None = None) -> LayoutText:
    """Run the full pipeline: sort, group, estimate, render, join.

    Rows are joined with exactly one line break each. When ``max_chars`` is
    set and exceeded, whole trailing lines are dropped (never mid-line) and
    the result is flagged as truncated.
    """
    cfg = cfg or LayoutConfig()
    ordered = sort_segments(page)
    rows = group_rows(ordered, cfg)
    char_width = estimate_char_width(rows)
    page_left = min(seg.bbox.x0 for seg in ordered)
    lines = [render_row(row, char_width, page_left, cfg) for row in rows]
    truncated = False
    if cfg.max_chars is not None:
        while lines and len("\n".join(lines)) > cfg.max_chars:
            lines.pop()
            truncated = True
    return LayoutText(text="\n".join(lines), rows_rendered=len(lines), truncated=truncated)
