"""Chunking: hierarchy-aware DFS grouping plus the length and structure baselines.

Hierarchical chunks are Markdown: each chunk repeats the heading path of its
node (``#`` for depth 1, ``##`` for depth 2, ...) above the node's text. When a
node does not fit under ``max_len`` together with its headings, its text is
cut at token boundaries and every piece is labelled ``text_split_<n> : ``.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from statistics import fmean
from typing import Any, Callable, Sequence

from hierchunk.hierarchy import DocumentTree, NodeKind
from hierchunk.layout import AnnotatedLayout, SegmentType

log = logging.getLogger(__name__)

TokenCounter = Callable[[str], int]

_TOKEN = re.compile(r"\S+")


def count_tokens(text: str) -> int:
    """Number of maximal non-whitespace runs."""
    return len(text.split())


_COUNTERS: dict[str, TokenCounter] = {"whitespace": count_tokens}


def register_token_counter(name: str, counter: TokenCounter) -> None:
    """Make a pure, deterministic counter selectable by name (e.g. a subword tokenizer)."""
    _COUNTERS[name] = counter


def get_token_counter(name: str) -> TokenCounter:
    try:
        return _COUNTERS[name]
    except KeyError:
        raise ValueError(f"unknown token counter {name!r}; registered: {sorted(_COUNTERS)}") from None


class ChunkMethod(str, Enum):
    MULTIDOCFUSION = "multidocfusion"
    LENGTH = "length"
    STRUCTURE = "structure"


@dataclass(frozen=True)
class ChunkConfig:
    max_len: int = 550
    method: ChunkMethod = ChunkMethod.MULTIDOCFUSION
    token_counter: str = "whitespace"

    def __post_init__(self):
        object.__setattr__(self, "method", ChunkMethod(self.method))
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")

    @property
    def counter(self) -> TokenCounter:
        return get_token_counter(self.token_counter)

    def to_dict(self) -> dict[str, Any]:
        return {"max_len": self.max_len, "method": self.method.value, "token_counter": self.token_counter}


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    document_id: str
    text: str
    source_node_ids: tuple[str, ...]
    split_index: int = 0
    token_count: int = 0
    oversize: bool = False

    def to_dict(self) -> dict[str, Any]:
        d = {
            "chunk_id": self.chunk_id,
            "document_id": self.document_id,
            "text": self.text,
            "source_node_ids": list(self.source_node_ids),
            "split_index": self.split_index,
            "token_count": self.token_count,
        }
        if self.oversize:
            d["oversize"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Chunk":
        return cls(
            chunk_id=d["chunk_id"],
            document_id=d["document_id"],
            text=d["text"],
            source_node_ids=tuple(d["source_node_ids"]),
            split_index=int(d.get("split_index", 0)),
            token_count=int(d["token_count"]),
            oversize=bool(d.get("oversize", False)),
        )


@dataclass(frozen=True)
class ChunkStats:
    chunk_count: int
    avg_chars: float
    avg_tokens: float

    def as_row(self, label: str = "") -> str:
        return f"{label:<16} chunks={self.chunk_count:>8,d}  avg_chars={self.avg_chars:>9.2f}  avg_tokens={self.avg_tokens:>8.2f}"


def chunk_stats(chunks: Sequence[Chunk]) -> ChunkStats:
    if not chunks:
        return ChunkStats(0, 0.0, 0.0)
    return ChunkStats(
        chunk_count=len(chunks),
        avg_chars=fmean(len(c.text) for c in chunks),
        avg_tokens=fmean(c.token_count for c in chunks),
    )


def _collapse(text: str) -> str:
    return " ".join(text.split())


def heading_line(depth: int, text: str) -> str:
    return f"{'#' * depth} {_collapse(text)}".rstrip()


def _largest_fit(lo: int, hi: int, fits: Callable[[int], bool]) -> int:
    """Largest n in [lo, hi] with fits(n), assuming fits is monotone; lo - 1 if none."""
    best = lo - 1
    while lo <= hi:
        mid = (lo + hi) // 2
        if fits(mid):
            best, lo = mid, mid + 1
        else:
            hi = mid - 1
    return best


class _Emitter:
    def __init__(self, document_id: str, config: ChunkConfig):
        self.document_id = document_id
        self.max_len = config.max_len
        self.count = config.counter
        self.chunks: list[Chunk] = []

    def add(
        self, text: str, ids: Sequence[str], split_index: int = 0, oversize: bool | None = None, n: int | None = None
    ) -> None:
        if n is None:
            n = self.count(text)
        if oversize is None:
            oversize = n > self.max_len
        self.chunks.append(
            Chunk(
                chunk_id=f"{self.document_id}#{len(self.chunks)}",
                document_id=self.document_id,
                text=text,
                source_node_ids=tuple(ids),
                split_index=split_index,
                token_count=n,
                oversize=oversize,
            )
        )


def _with_context(context: str, body: str) -> str:
    return f"{context}\n{body}" if context else body


@lru_cache(maxsize=256)
def _skip_tokens(m: int) -> re.Pattern:
    """Matches up to ``m`` tokens with their trailing whitespace, so match.end() is the next token start."""
    return re.compile(r"\s*(?:\S+(?:\s+|$)){1,%d}" % m)


def _emit_node(out: _Emitter, headings: list[tuple[str, str]], node_id: str, body: str) -> None:
    """Emit one node's chunk(s); ``headings`` is [(header id, rendered line)] shallowest first."""
    headings = list(headings)
    fast = out.count is count_tokens
    starts: list[int] = []
    body_tokens = count_tokens(body) if fast else 0
    if not fast:
        starts = [m.start() for m in _TOKEN.finditer(body)]
    while True:
        context = "\n".join(line for _, line in headings)
        ids = [hid for hid, _ in headings] + [node_id]
        whole = _with_context(context, body)
        whole_tokens = count_tokens(context) + body_tokens if fast else out.count(whole)
        if whole_tokens <= out.max_len:
            out.add(whole, ids, n=whole_tokens)
            return

        def piece(n: int, pos: int, m: int) -> str:
            begin = 0 if pos == 0 else starts[pos]
            end = starts[pos + m] if pos + m < len(starts) else len(body)
            return _with_context(context, f"text_split_{n} : {body[begin:end]}")

        if fast:
            # heading lines end in non-space and the label ends in a space, so counts simply add up
            per_piece = out.max_len - count_tokens(context) - 2
            if body_tokens and per_piece >= 1:
                break
        elif starts and out.count(piece(1, 0, 1)) <= out.max_len:
            break
        if len(headings) > 1:
            log.warning("heading context of %s exceeds max_len=%d; dropping %r", node_id, out.max_len, headings[-1][1])
            headings.pop()
            continue
        out.add(whole, ids, oversize=True, n=whole_tokens)
        return

    if fast:
        skip = _skip_tokens(per_piece)
        overhead = count_tokens(context) + 2
        begin, n, remaining = 0, 1, body_tokens
        while begin < len(body):
            end = skip.match(body, begin).end()
            taken = min(per_piece, remaining)
            out.add(_with_context(context, f"text_split_{n} : {body[begin:end]}"), ids, split_index=n, n=overhead + taken)
            begin, n, remaining = end, n + 1, remaining - taken
        return

    pos, n = 0, 1
    while pos < len(starts):
        m = _largest_fit(1, len(starts) - pos, lambda k: out.count(piece(n, pos, k)) <= out.max_len)
        oversize = m < 1
        m = max(m, 1)
        out.add(piece(n, pos, m), ids, split_index=n, oversize=oversize)
        pos += m
        n += 1


def dfs_chunk(tree: DocumentTree, config: ChunkConfig | None = None, document_id: str = "doc") -> list[Chunk]:
    """Pre-order DFS grouping over a document tree.

    Every general node yields chunk(s) of its heading path plus its text; a
    header with no children yields a heading-only chunk so its text is still
    retrievable. Chunks are numbered in emission order.
    """
    config = config or ChunkConfig()
    out = _Emitter(document_id, config)
    for node in tree.preorder():
        if node.kind is NodeKind.FAKE_ROOT:
            continue
        headings = [(a.id, heading_line(a.depth, a.text)) for a in tree.ancestors(node.id)]
        if node.kind is NodeKind.GENERAL:
            _emit_node(out, headings, node.id, node.text)
        elif not node.children:
            # the header's own line is the body, so overflow drops ancestors and never the header itself
            _emit_node(out, headings, node.id, heading_line(node.depth, node.text))
    return out.chunks


def _windows(tokens: Sequence[str], max_len: int, count: TokenCounter) -> list[tuple[int, int]]:
    if count is count_tokens:
        return [(i, min(i + max_len, len(tokens))) for i in range(0, len(tokens), max_len)]
    spans, pos = [], 0
    while pos < len(tokens):
        m = max(1, _largest_fit(1, len(tokens) - pos, lambda k: count(" ".join(tokens[pos : pos + k])) <= max_len))
        spans.append((pos, pos + m))
        pos += m
    return spans


def length_chunk(layout: AnnotatedLayout, config: ChunkConfig | None = None) -> list[Chunk]:
    """Fixed windows of ``max_len`` tokens over the whole document, ignoring structure."""
    config = config or ChunkConfig(method=ChunkMethod.LENGTH)
    out = _Emitter(layout.document_id, config)
    tokens: list[str] = []
    owners: list[str] = []
    for seg in layout.segments:
        words = seg.text.split()
        tokens.extend(words)
        owners.extend([seg.id] * len(words))
    for begin, end in _windows(tokens, config.max_len, out.count):
        out.add(" ".join(tokens[begin:end]), list(dict.fromkeys(owners[begin:end])))
    return out.chunks


_TYPE_LABELS = {SegmentType.SECTION_HEADER: "Section"}


def render_segment(segment_type: SegmentType, text: str) -> str:
    label = _TYPE_LABELS.get(segment_type, segment_type.value)
    return f"[{label}] {_collapse(text)}".rstrip()


def structure_chunk(layout: AnnotatedLayout, config: ChunkConfig | None = None) -> list[Chunk]:
    """Greedy packing of ``[Type] text`` segments joined by `` - `` up to ``max_len``."""
    config = config or ChunkConfig(method=ChunkMethod.STRUCTURE)
    out = _Emitter(layout.document_id, config)
    parts: list[str] = []
    ids: list[str] = []

    def flush():
        if parts:
            out.add(" - ".join(parts), ids)
            parts.clear()
            ids.clear()

    for seg in layout.segments:
        rendered = render_segment(seg.segment_type, seg.text)
        if out.count(" - ".join(parts + [rendered])) <= config.max_len:
            parts.append(rendered)
            ids.append(seg.id)
            continue
        flush()
        if out.count(rendered) <= config.max_len:
            parts.append(rendered)
            ids.append(seg.id)
            continue
        words = rendered.split()
        for n, (begin, end) in enumerate(_windows(words, config.max_len, out.count), start=1):
            out.add(" ".join(words[begin:end]), [seg.id], split_index=n)
    flush()
    return out.chunks


def chunk_document(
    config: ChunkConfig, *, layout: AnnotatedLayout | None = None, tree: DocumentTree | None = None, document_id: str = ""
) -> list[Chunk]:
    if config.method is ChunkMethod.MULTIDOCFUSION:
        if tree is None:
            raise ValueError("multidocfusion chunking needs a document tree")
        return dfs_chunk(tree, config, document_id or (layout.document_id if layout else "doc"))
    if layout is None:
        raise ValueError(f"{config.method.value} chunking needs the annotated layout")
    if config.method is ChunkMethod.LENGTH:
        return length_chunk(layout, config)
    return structure_chunk(layout, config)
