"""Batch stages over a corpus directory: tree -> chunk -> index -> retrieve -> eval.

Each stage reads and writes files under a run directory and records its
configuration and outputs in ``manifest.json`` there. Per-document failures
are collected rather than raised.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, TypeVar

from hierchunk.chunker import Chunk, ChunkConfig, ChunkMethod, chunk_document, chunk_stats
from hierchunk.errors import HierchunkError
from hierchunk.evaluation import build_report, format_report
from hierchunk.hierarchy import DocumentTree, HierarchyAssignment, build_document_tree
from hierchunk.layout import AnnotatedLayout, extract_header_list
from hierchunk.metrics import LayoutIndex, QaRecord
from hierchunk.providers import ProviderConfig, resolve_many
from hierchunk.retrieval import build_bm25_index, query
from hierchunk import store

log = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MANIFEST = "manifest.json"
CHUNKS = "chunks.jsonl"
TREES = "trees"
INDEX = "index.bin"
RESULTS = "results.jsonl"
REPORT = "report.json"
REPORT_TXT = "report.txt"


class NoDocumentsError(HierchunkError):
    pass


@dataclass
class StageOutcome:
    documents: int = 0
    failures: dict[str, str] = field(default_factory=dict)
    fallback_count: int = 0

    @property
    def exit_code(self) -> int:
        if self.documents and len(self.failures) >= self.documents:
            return 1
        return 2 if self.failures else 0


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _pmap(fn: Callable[[T], R], items: Sequence[T], jobs: int) -> list[R]:
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (jobs * 4))))


def load_layouts(layout_dir: Path | str) -> tuple[list[AnnotatedLayout], dict[str, str], list[Path]]:
    """Read every ``*.json`` layout; returns (layouts, failures by file name, paths)."""
    paths = store.layout_files(layout_dir)
    if not paths:
        raise NoDocumentsError(f"no documents in {layout_dir}")
    layouts, failures = [], {}
    for p in paths:
        try:
            layouts.append(store.read_layout(p))
        except (HierchunkError, OSError, ValueError) as exc:
            failures[p.name] = str(exc)
            log.error("%s: %s", p, exc)
    return layouts, failures, paths


def load_qa(path: Path | str) -> list[QaRecord]:
    return [QaRecord.from_dict(rec) for rec in store.read_jsonl(path)]


def load_trees(tree_dir: Path | str) -> dict[str, DocumentTree]:
    trees = {}
    for p in sorted(Path(tree_dir).glob("*.json")):
        doc_id, tree = store.read_tree(p)
        trees[doc_id] = tree
    return trees


class Manifest:
    """Read-modify-write helper around a run directory's manifest."""

    def __init__(self, out_dir: Path | str):
        self.out_dir = Path(out_dir)
        self.path = self.out_dir / MANIFEST
        if self.path.exists():
            self.run = store.read_manifest(self.path)
        else:
            self.run = store.RunManifest(
                run_id=self.out_dir.name, started_at=_now(), finished_at="", config={}, corpus_digest=""
            )

    def update(self, *, config: dict[str, Any] | None = None, outputs: dict[str, str] | None = None) -> None:
        if config:
            self.run.config.update(config)
        if outputs:
            self.run.outputs.update(outputs)

    def save(self) -> None:
        self.run.finished_at = _now()
        store.write_manifest(self.path, self.run)


def run_metadata(config: dict[str, Any], fallback_count: int) -> dict[str, Any]:
    chunk = config.get("chunk", {})
    retrieval = config.get("retrieval", {})
    provider = config.get("provider", {})
    return {
        "method": chunk.get("method"),
        "provider": provider.get("kind"),
        "max_len": chunk.get("max_len"),
        "k": retrieval.get("k"),
        "k1": retrieval.get("k1"),
        "b": retrieval.get("b"),
        "fallback_count": fallback_count,
    }


def _tree_one(item: tuple[AnnotatedLayout, HierarchyAssignment]) -> DocumentTree:
    layout, assignment = item
    return build_document_tree(layout, assignment)


def stage_tree(layout_dir: Path | str, out_dir: Path | str, provider: ProviderConfig, jobs: int = 1) -> StageOutcome:
    out_dir = Path(out_dir)
    layouts, failures, paths = load_layouts(layout_dir)
    outcome = StageOutcome(documents=len(paths), failures=dict(failures))
    resolved = resolve_many(provider, [(lay.document_id, extract_header_list(lay)) for lay in layouts])
    ok: list[tuple[AnnotatedLayout, HierarchyAssignment]] = []
    for lay, res in zip(layouts, resolved):
        if isinstance(res, Exception):
            outcome.failures[lay.document_id] = str(res)
            log.error("%s: %s", lay.document_id, res)
            continue
        if res.fallback:
            outcome.fallback_count += 1
        ok.append((lay, res))
    trees = _pmap(_tree_one, ok, jobs)
    tree_dir = out_dir / TREES
    tree_dir.mkdir(parents=True, exist_ok=True)
    for (lay, _), tree in zip(ok, trees):
        store.write_tree(tree_dir / store.tree_filename(lay.document_id), tree, lay.document_id)
    log.info("trees: %d written, %d failed, %d LLM fallbacks", len(ok), len(outcome.failures), outcome.fallback_count)
    m = Manifest(out_dir)
    m.run.corpus_digest = store.corpus_digest(paths)
    m.run.fallback_count = outcome.fallback_count
    m.run.documents = outcome.documents
    m.run.failed_documents = sorted(outcome.failures)
    m.update(config={"provider": provider.to_dict()}, outputs={"trees": TREES})
    m.save()
    return outcome


def _chunk_one(item: tuple[ChunkConfig, AnnotatedLayout | None, DocumentTree | None, str]) -> list[Chunk]:
    config, layout, tree, doc_id = item
    return chunk_document(config, layout=layout, tree=tree, document_id=doc_id)


def stage_chunk(
    out_dir: Path | str,
    config: ChunkConfig,
    *,
    layout_dir: Path | str | None = None,
    tree_dir: Path | str | None = None,
    jobs: int = 1,
) -> tuple[StageOutcome, list[Chunk]]:
    out_dir = Path(out_dir)
    items: list[tuple[ChunkConfig, AnnotatedLayout | None, DocumentTree | None, str]] = []
    outcome = StageOutcome()
    paths: list[Path] = []
    if config.method is ChunkMethod.MULTIDOCFUSION:
        tree_dir = Path(tree_dir) if tree_dir else out_dir / TREES
        trees = load_trees(tree_dir)
        if not trees:
            raise NoDocumentsError(f"no trees in {tree_dir}; run the tree stage first")
        items = [(config, None, tree, doc_id) for doc_id, tree in sorted(trees.items())]
        outcome.documents = len(items)
    else:
        if layout_dir is None:
            raise ValueError(f"{config.method.value} chunking needs --layouts")
        layouts, failures, paths = load_layouts(layout_dir)
        outcome.documents, outcome.failures = len(paths), dict(failures)
        items = [(config, lay, None, lay.document_id) for lay in sorted(layouts, key=lambda l: l.document_id)]
    chunks = [c for doc_chunks in _pmap(_chunk_one, items, jobs) for c in doc_chunks]
    store.write_chunks(out_dir / CHUNKS, chunks)
    m = Manifest(out_dir)
    if paths and not m.run.corpus_digest:
        m.run.corpus_digest = store.corpus_digest(paths)
        m.run.documents = outcome.documents
    m.update(config={"chunk": config.to_dict()}, outputs={"chunks": CHUNKS})
    m.save()
    return outcome, chunks


def stage_index(chunks_path: Path | str, out_dir: Path | str, k1: float = 1.2, b: float = 0.75) -> Path:
    out_dir = Path(out_dir)
    index = build_bm25_index(store.read_chunks(chunks_path), k1=k1, b=b)
    store.write_index(out_dir / INDEX, index)
    m = Manifest(out_dir)
    m.update(config={"retrieval": {**m.run.config.get("retrieval", {}), "k1": k1, "b": b}}, outputs={"index": INDEX})
    m.save()
    return out_dir / INDEX


def stage_retrieve(index_path: Path | str, qa_path: Path | str, out_dir: Path | str, k: int = 4) -> Path:
    out_dir = Path(out_dir)
    index = store.read_index(index_path)
    results = [query(index, rec.question, k, query_id=rec.query_id) for rec in load_qa(qa_path)]
    store.write_results(out_dir / RESULTS, results)
    m = Manifest(out_dir)
    m.update(config={"retrieval": {**m.run.config.get("retrieval", {}), "k": k}}, outputs={"results": RESULTS})
    m.save()
    return out_dir / RESULTS


def stage_eval(
    results_path: Path | str,
    qa_path: Path | str,
    chunks_path: Path | str,
    out_dir: Path | str,
    *,
    layout_dir: Path | str | None = None,
    tree_dir: Path | str | None = None,
    gold_tree_dir: Path | str | None = None,
    predictions_path: Path | str | None = None,
) -> dict[str, Any]:
    out_dir = Path(out_dir)
    chunks = store.read_chunks(chunks_path)
    layout_index = None
    if layout_dir is not None:
        layouts, _, _ = load_layouts(layout_dir)
        layout_index = LayoutIndex.from_layouts(layouts)
    predictions = None
    if predictions_path is not None:
        predictions = {str(r["query_id"]): r["answer"] for r in store.read_jsonl(predictions_path)}
    pred_trees = gold_trees = None
    if gold_tree_dir is not None:
        gold_trees = load_trees(gold_tree_dir)
        pred_trees = load_trees(tree_dir or out_dir / TREES)
    m = Manifest(out_dir)
    report = build_report(
        store.read_results(results_path),
        load_qa(qa_path),
        chunks,
        layout_index=layout_index,
        run=run_metadata(m.run.config, m.run.fallback_count),
        pred_trees=pred_trees,
        gold_trees=gold_trees,
        predictions=predictions,
    )
    store.write_report(out_dir / REPORT, report)
    store.atomic_write(out_dir / REPORT_TXT, format_report(report).encode("utf-8"))
    m.update(outputs={"report": REPORT})
    m.save()
    return report


def stats_lines(chunk_files: Iterable[Path | str]) -> list[str]:
    lines = []
    for path in chunk_files:
        lines.append(chunk_stats(store.read_chunks(path)).as_row(Path(path).parent.name or str(path)))
    return lines


def dump_config(config: dict[str, Any]) -> str:
    return json.dumps(config, indent=2, sort_keys=True)
