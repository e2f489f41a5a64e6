"""Annotated-layout ingestion: parsing, validation, reading order, header extraction.

A layout is the merged output of a document-parsing detector and an OCR engine:
typed, positioned, text-bearing segments. Files hold one document each::

    {"document_id": "...",
     "segments": [{"id": "...", "segment_type": "Text", "page_number": 0,
                   "top": 10, "left": 5, "width": 100, "height": 20,
                   "text": "..."}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from hierchunk.errors import LayoutError


class SegmentType(str, Enum):
    TITLE = "Title"
    SECTION_HEADER = "SectionHeader"
    TEXT = "Text"
    TABLE = "Table"
    FIGURE = "Figure"
    LIST = "List"
    CAPTION = "Caption"
    OTHER = "Other"

    @classmethod
    def parse(cls, raw: Any) -> "SegmentType":
        """Map a detector label onto the enumeration; unknown labels become OTHER."""
        if not isinstance(raw, str):
            return cls.OTHER
        key = "".join(ch for ch in raw.lower() if ch.isalnum())
        return _TYPE_ALIASES.get(key, cls.OTHER)

    @property
    def is_header(self) -> bool:
        return self in (SegmentType.TITLE, SegmentType.SECTION_HEADER)


_TYPE_ALIASES = {
    "title": SegmentType.TITLE,
    "sectionheader": SegmentType.SECTION_HEADER,
    "section": SegmentType.SECTION_HEADER,
    "header": SegmentType.SECTION_HEADER,
    "text": SegmentType.TEXT,
    "paragraph": SegmentType.TEXT,
    "table": SegmentType.TABLE,
    "figure": SegmentType.FIGURE,
    "picture": SegmentType.FIGURE,
    "list": SegmentType.LIST,
    "listitem": SegmentType.LIST,
    "caption": SegmentType.CAPTION,
    "other": SegmentType.OTHER,
}


@dataclass(frozen=True)
class BoundingBox:
    page_number: int
    top: int
    left: int
    width: int = 0
    height: int = 0

    @property
    def order_key(self) -> tuple[int, int, int]:
        return (self.page_number, self.top, self.left)


@dataclass(frozen=True)
class Segment:
    id: str
    segment_type: SegmentType
    bbox: BoundingBox
    text: str = ""

    @property
    def is_header(self) -> bool:
        return self.segment_type.is_header

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "segment_type": self.segment_type.value,
            "page_number": self.bbox.page_number,
            "top": self.bbox.top,
            "left": self.bbox.left,
            "width": self.bbox.width,
            "height": self.bbox.height,
            "text": self.text,
        }


@dataclass(frozen=True)
class AnnotatedLayout:
    document_id: str
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.document_id:
            raise LayoutError("document_id must be non-empty")
        seen: set[str] = set()
        for seg in self.segments:
            if seg.id in seen:
                raise LayoutError(f"duplicate segment id {seg.id!r}")
            seen.add(seg.id)

    def segment(self, segment_id: str) -> Segment:
        for seg in self.segments:
            if seg.id == segment_id:
                return seg
        raise KeyError(segment_id)

    def to_dict(self) -> dict[str, Any]:
        return {"document_id": self.document_id, "segments": [s.to_dict() for s in self.segments]}


def reading_order_sort(segments: Iterable[Segment]) -> list[Segment]:
    # sorted() is stable, so full-key ties keep input order
    return sorted(segments, key=lambda s: s.bbox.order_key)


def extract_header_list(layout: AnnotatedLayout) -> list[Segment]:
    return [s for s in layout.segments if s.is_header]


def _decode_json(raw: bytes | str) -> Any:
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LayoutError(f"invalid UTF-8 at byte {exc.start}", byte_offset=exc.start) from exc
    else:
        text = raw
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise LayoutError(f"malformed JSON at byte {offset}: {exc.msg}", byte_offset=offset) from exc


def _int_field(rec: dict, names: tuple[str, ...], index: int, *, required: bool = True) -> int:
    for name in names:
        if name in rec:
            value = rec[name]
            if isinstance(value, bool) or not isinstance(value, int):
                raise LayoutError(f"segment {index}: field {names[0]!r} must be an integer, got {value!r}")
            if value < 0:
                raise LayoutError(f"segment {index}: field {names[0]!r} must be non-negative, got {value}")
            return value
    if required:
        raise LayoutError(f"segment {index}: missing required field {names[0]!r}")
    return 0


def _segment_from_dict(rec: Any, index: int) -> Segment:
    if not isinstance(rec, dict):
        raise LayoutError(f"segment {index}: expected an object")
    if "id" not in rec:
        raise LayoutError(f"segment {index}: missing required field 'id'")
    seg_id = rec["id"]
    if isinstance(seg_id, int) and not isinstance(seg_id, bool):
        seg_id = str(seg_id)
    if not isinstance(seg_id, str) or not seg_id:
        raise LayoutError(f"segment {index}: field 'id' must be a non-empty string")
    if "segment_type" in rec:
        seg_type = SegmentType.parse(rec["segment_type"])
    elif "type" in rec:
        seg_type = SegmentType.parse(rec["type"])
    else:
        raise LayoutError(f"segment {index}: missing required field 'segment_type'")
    bbox = BoundingBox(
        page_number=_int_field(rec, ("page_number", "page"), index),
        top=_int_field(rec, ("top",), index),
        left=_int_field(rec, ("left",), index),
        width=_int_field(rec, ("width",), index, required=False),
        height=_int_field(rec, ("height",), index, required=False),
    )
    if "text" not in rec:
        raise LayoutError(f"segment {index}: missing required field 'text'")
    text = rec["text"]
    if text is None:
        text = ""
    if not isinstance(text, str):
        raise LayoutError(f"segment {index}: field 'text' must be a string")
    return Segment(id=seg_id, segment_type=seg_type, bbox=bbox, text=text.rstrip("\r\n"))


def layout_from_dict(data: Any) -> AnnotatedLayout:
    if not isinstance(data, dict):
        raise LayoutError("layout must be a JSON object")
    doc_id = data.get("document_id")
    if not isinstance(doc_id, str) or not doc_id:
        raise LayoutError("missing required field 'document_id'")
    raw_segments = data.get("segments")
    if not isinstance(raw_segments, list):
        raise LayoutError("missing required field 'segments'")
    segments = [_segment_from_dict(rec, i) for i, rec in enumerate(raw_segments)]
    seen: set[str] = set()
    for seg in segments:
        if seg.id in seen:
            raise LayoutError(f"duplicate segment id {seg.id!r}")
        seen.add(seg.id)
    return AnnotatedLayout(document_id=doc_id, segments=tuple(reading_order_sort(segments)))


def parse_layout(raw: bytes | str) -> AnnotatedLayout:
    """Parse one layout JSON document into a validated, reading-order-sorted layout.

    Raises LayoutError with ``byte_offset`` set for malformed JSON, and with the
    offending field/segment index or id for schema violations.
    """
    return layout_from_dict(_decode_json(raw))


def serialize_layout(layout: AnnotatedLayout) -> bytes:
    return (json.dumps(layout.to_dict(), ensure_ascii=False, indent=1) + "\n").encode("utf-8")
