"""On-disk artifacts: chunks, trees, assignments, indexes, reports, run manifests.

A run directory looks like::

    runs/<run_id>/manifest.json
                 /chunks.jsonl
                 /trees/<document_id>.json
                 /index.bin
                 /report.json

Every file carries a ``format_version``; readers refuse versions with a newer
major number. Writes go to a temp file that is then renamed into place.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

from hierchunk.chunker import Chunk
from hierchunk.errors import FormatVersionError
from hierchunk.hierarchy import DocumentTree, HierarchyAssignment, assignment_from_list
from hierchunk.layout import AnnotatedLayout, parse_layout, serialize_layout
from hierchunk.retrieval import INDEX_FORMAT, Bm25Index, RetrievalResult

FORMAT_VERSION = 1


def _check_version(found: Any, path: Path | str) -> None:
    major = int(str(found if found is not None else FORMAT_VERSION).split(".")[0])
    if major > FORMAT_VERSION:
        raise FormatVersionError(f"{path}: format_version {found} is newer than supported ({FORMAT_VERSION})")


def atomic_write(path: Path | str, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=False)


def _read_bytes(path: Path | str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _iter_jsonl(path: Path | str) -> Iterator[dict[str, Any]]:
    # split on "\n" only: str.splitlines also breaks on U+0085/U+2028, which may appear raw inside strings
    for lineno, line in enumerate(_read_bytes(path).decode("utf-8").split("\n"), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
        _check_version(rec.get("format_version"), f"{path}:{lineno}")
        yield rec


def write_jsonl(path: Path | str, records: Iterable[dict[str, Any]]) -> None:
    atomic_write(path, "".join(_dumps(r) + "\n" for r in records).encode("utf-8"))


def read_jsonl(path: Path | str) -> list[dict[str, Any]]:
    return list(_iter_jsonl(path))


# chunks -------------------------------------------------------------------


def write_chunks(path: Path | str, chunks: Iterable[Chunk]) -> None:
    write_jsonl(path, ({**c.to_dict(), "format_version": FORMAT_VERSION} for c in chunks))


def read_chunks(path: Path | str) -> list[Chunk]:
    return [Chunk.from_dict(rec) for rec in _iter_jsonl(path)]


# layouts ------------------------------------------------------------------


def write_layout(path: Path | str, layout: AnnotatedLayout) -> None:
    atomic_write(path, serialize_layout(layout))


def read_layout(path: Path | str) -> AnnotatedLayout:
    return parse_layout(_read_bytes(path))


def layout_files(directory: Path | str) -> list[Path]:
    return sorted(p for p in Path(directory).glob("*.json") if p.is_file())


# trees --------------------------------------------------------------------


def tree_to_json(tree: DocumentTree, document_id: str) -> bytes:
    doc = {"format_version": FORMAT_VERSION, "document_id": document_id, "tree": tree.to_dict()}
    return (_dumps(doc) + "\n").encode("utf-8")


def write_tree(path: Path | str, tree: DocumentTree, document_id: str) -> None:
    atomic_write(path, tree_to_json(tree, document_id))


def read_tree(path: Path | str) -> tuple[str, DocumentTree]:
    doc = json.loads(_read_bytes(path))
    _check_version(doc.get("format_version"), path)
    return doc["document_id"], DocumentTree.from_dict(doc["tree"])


def tree_filename(document_id: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in document_id)
    if safe != document_id:
        safe += "-" + hashlib.sha1(document_id.encode()).hexdigest()[:8]
    return safe + ".json"


# assignments --------------------------------------------------------------


def write_assignments(path: Path | str, assignments: dict[str, HierarchyAssignment]) -> None:
    """Same shape the file provider reads: ``{document_id: [{"id", "parent"}]}``."""
    atomic_write(path, (_dumps({d: a.to_list() for d, a in assignments.items()}) + "\n").encode("utf-8"))


def read_assignments(path: Path | str) -> dict[str, HierarchyAssignment]:
    data = json.loads(_read_bytes(path))
    return {d: assignment_from_list(entries, source="file") for d, entries in data.items()}


# index --------------------------------------------------------------------


def write_index(path: Path | str, index: Bm25Index) -> None:
    payload = _dumps(index.to_dict()).encode("utf-8")
    atomic_write(path, gzip.compress(payload, mtime=0))


def read_index(path: Path | str) -> Bm25Index:
    raw = _read_bytes(path)
    data = json.loads(gzip.decompress(raw) if raw[:2] == b"\x1f\x8b" else raw)
    if data.get("format") != INDEX_FORMAT:
        raise FormatVersionError(f"{path}: not a BM25 index (format={data.get('format')!r})")
    _check_version(data.get("format_version"), path)
    return Bm25Index.from_dict(data)


# retrieval results / reports ---------------------------------------------


def write_results(path: Path | str, results: Iterable[RetrievalResult]) -> None:
    write_jsonl(path, ({**r.to_dict(), "format_version": FORMAT_VERSION} for r in results))


def read_results(path: Path | str) -> list[RetrievalResult]:
    return [RetrievalResult.from_dict(rec) for rec in _iter_jsonl(path)]


def write_report(path: Path | str, report: dict[str, Any]) -> None:
    atomic_write(path, (json.dumps({**report, "format_version": FORMAT_VERSION}, indent=2) + "\n").encode("utf-8"))


def read_report(path: Path | str) -> dict[str, Any]:
    data = json.loads(_read_bytes(path))
    _check_version(data.pop("format_version", None), path)
    return data


# manifest -----------------------------------------------------------------


def file_digest(path: Path | str) -> str:
    return hashlib.sha256(_read_bytes(path)).hexdigest()


def corpus_digest(paths: Sequence[Path | str]) -> str:
    """Order-independent digest: hash of the sorted per-file content hashes."""
    h = hashlib.sha256()
    for digest in sorted(file_digest(p) for p in paths):
        h.update(digest.encode())
    return h.hexdigest()


@dataclass
class RunManifest:
    run_id: str
    started_at: str
    finished_at: str
    config: dict[str, Any]
    corpus_digest: str
    outputs: dict[str, str] = field(default_factory=dict)
    fallback_count: int = 0
    documents: int = 0
    failed_documents: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {"format_version": FORMAT_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunManifest":
        d = dict(d)
        d.pop("format_version", None)
        return cls(**d)


def write_manifest(path: Path | str, run: RunManifest) -> None:
    base = Path(path).parent
    for name, out in run.outputs.items():
        target = Path(out) if Path(out).is_absolute() else base / out
        if not target.exists():
            raise FileNotFoundError(f"manifest output {name!r} points at missing path {target}")
    atomic_write(path, (json.dumps(run.to_dict(), indent=2) + "\n").encode("utf-8"))


def read_manifest(path: Path | str) -> RunManifest:
    data = json.loads(_read_bytes(path))
    _check_version(data.get("format_version"), path)
    return RunManifest.from_dict(data)
