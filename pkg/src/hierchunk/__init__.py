"""Hierarchy-aware chunking of long documents and retrieval evaluation."""

from hierchunk.chunker import Chunk, ChunkConfig, ChunkStats, chunk_stats, count_tokens, dfs_chunk, length_chunk, structure_chunk
from hierchunk.hierarchy import (
    DocumentTree,
    HierarchyAssignment,
    NodeKind,
    attach_general_nodes,
    build_document_tree,
    build_header_tree,
    heuristic_hierarchy,
    parse_assignment,
)
from hierchunk.layout import AnnotatedLayout, BoundingBox, Segment, SegmentType, extract_header_list, parse_layout, reading_order_sort
from hierchunk.retrieval import Bm25Index, RetrievalResult, build_bm25_index, query

__version__ = "0.1.0"

__all__ = [
    "AnnotatedLayout",
    "Bm25Index",
    "BoundingBox",
    "Chunk",
    "ChunkConfig",
    "ChunkStats",
    "DocumentTree",
    "HierarchyAssignment",
    "NodeKind",
    "RetrievalResult",
    "Segment",
    "SegmentType",
    "attach_general_nodes",
    "build_bm25_index",
    "build_document_tree",
    "build_header_tree",
    "chunk_stats",
    "count_tokens",
    "dfs_chunk",
    "extract_header_list",
    "heuristic_hierarchy",
    "length_chunk",
    "parse_assignment",
    "parse_layout",
    "query",
    "reading_order_sort",
    "structure_chunk",
]
