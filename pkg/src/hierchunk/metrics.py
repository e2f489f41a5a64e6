"""Scoring functions for retrieval runs and for predicted hierarchies or answers.

All scores lie in [0, 1]. Retrieval metrics use binary relevance; TEDS uses
Zhang-Shasha tree edit distance with unit costs.
"""

from __future__ import annotations

import math
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence, Union

from hierchunk.chunker import Chunk
from hierchunk.errors import EvidenceError
from hierchunk.hierarchy import DocumentTree, HierarchyAssignment
from hierchunk.layout import AnnotatedLayout
from hierchunk.retrieval import RetrievalResult


def normalize_answer(text: str) -> str:
    """Lowercase, turn punctuation into spaces, collapse whitespace."""
    chars = [" " if unicodedata.category(ch).startswith("P") else ch for ch in text.lower()]
    return " ".join("".join(chars).split())


@dataclass(frozen=True)
class Evidence:
    document_id: str
    segment_id: str | None = None
    page_number: int | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"document_id": self.document_id}
        if self.segment_id is not None:
            d["segment_id"] = self.segment_id
        if self.page_number is not None:
            d["page_number"] = self.page_number
        return d


@dataclass(frozen=True)
class QaRecord:
    query_id: str
    question: str
    gold_answers: tuple[str, ...]
    gold_evidence: tuple[Evidence, ...] | None = None

    def __post_init__(self):
        if not self.gold_answers:
            raise ValueError(f"query {self.query_id!r}: gold_answers must be non-empty")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"query_id": self.query_id, "question": self.question, "gold_answers": list(self.gold_answers)}
        if self.gold_evidence is not None:
            d["gold_evidence"] = [e.to_dict() for e in self.gold_evidence]
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "QaRecord":
        evidence = d.get("gold_evidence")
        answers = d["gold_answers"]
        if isinstance(answers, str):
            answers = [answers]
        return cls(
            query_id=str(d["query_id"]),
            question=d["question"],
            gold_answers=tuple(answers),
            gold_evidence=None
            if evidence is None
            else tuple(
                Evidence(
                    document_id=e["document_id"],
                    segment_id=None if e.get("segment_id") is None else str(e["segment_id"]),
                    page_number=e.get("page_number"),
                )
                for e in evidence
            ),
        )


@dataclass(frozen=True)
class RelevanceJudgment:
    query_id: str
    relevant_chunk_ids: frozenset[str] = field(default_factory=frozenset)


class LayoutIndex:
    """Lookup of (document_id, segment_id) -> page number, for resolving gold evidence.

    Built from layouts, pages are known. Built from chunks only, segment ids
    resolve but page evidence cannot.
    """

    def __init__(self, pages: dict[str, dict[str, int | None]]):
        self.pages = pages

    @classmethod
    def from_layouts(cls, layouts: Iterable[AnnotatedLayout]) -> "LayoutIndex":
        return cls({lay.document_id: {s.id: s.bbox.page_number for s in lay.segments} for lay in layouts})

    @classmethod
    def from_chunks(cls, chunks: Iterable[Chunk]) -> "LayoutIndex":
        pages: dict[str, dict[str, int | None]] = {}
        for c in chunks:
            doc = pages.setdefault(c.document_id, {})
            for sid in c.source_node_ids:
                doc.setdefault(sid, None)
        return cls(pages)

    def check(self, ev: Evidence) -> None:
        doc = self.pages.get(ev.document_id)
        if doc is None:
            raise EvidenceError(f"evidence names unknown document {ev.document_id!r}")
        if ev.segment_id is not None and ev.segment_id not in doc:
            raise EvidenceError(f"evidence names unknown segment {ev.segment_id!r} in document {ev.document_id!r}")
        if ev.segment_id is None:
            if ev.page_number is None:
                raise EvidenceError(f"evidence for {ev.document_id!r} has neither segment_id nor page_number")
            if any(p is None for p in doc.values()):
                raise EvidenceError("page-level evidence needs layouts to resolve pages")
            if ev.page_number not in set(doc.values()):
                raise EvidenceError(f"evidence names page {ev.page_number} absent from document {ev.document_id!r}")

    def page_of(self, document_id: str, segment_id: str) -> int | None:
        return self.pages.get(document_id, {}).get(segment_id)


class RelevanceLabeler:
    """Labels chunks relevant to QA records; caches normalized chunk text across queries."""

    def __init__(self, chunks: Sequence[Chunk], layout_index: LayoutIndex | None = None):
        self.chunks = list(chunks)
        self.layout_index = layout_index or LayoutIndex.from_chunks(self.chunks)
        self._normalized: list[str] | None = None

    def _texts(self) -> list[str]:
        if self._normalized is None:
            self._normalized = [normalize_answer(c.text) for c in self.chunks]
        return self._normalized

    def label(self, qa: QaRecord) -> RelevanceJudgment:
        if qa.gold_evidence:
            for ev in qa.gold_evidence:
                self.layout_index.check(ev)
            segments = {(ev.document_id, ev.segment_id) for ev in qa.gold_evidence if ev.segment_id is not None}
            pages = {(ev.document_id, ev.page_number) for ev in qa.gold_evidence if ev.segment_id is None}
            relevant = set()
            for c in self.chunks:
                for sid in c.source_node_ids:
                    if (c.document_id, sid) in segments or (
                        pages and (c.document_id, self.layout_index.page_of(c.document_id, sid)) in pages
                    ):
                        relevant.add(c.chunk_id)
                        break
            return RelevanceJudgment(qa.query_id, frozenset(relevant))
        answers = [a for a in (normalize_answer(g) for g in qa.gold_answers) if a]
        relevant = {c.chunk_id for c, text in zip(self.chunks, self._texts()) if any(a in text for a in answers)}
        return RelevanceJudgment(qa.query_id, frozenset(relevant))


def label_relevance(chunks: Sequence[Chunk], qa: QaRecord, layout_index: LayoutIndex | None = None) -> RelevanceJudgment:
    """Evidence intersection when gold evidence exists, else normalized answer substring match."""
    return RelevanceLabeler(chunks, layout_index).label(qa)


def _require_judgment(judgment: RelevanceJudgment, k: int) -> None:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not judgment.relevant_chunk_ids:
        raise ValueError(f"query {judgment.query_id!r} has no relevant chunks; skip it")


def precision_recall_at_k(result: RetrievalResult, judgment: RelevanceJudgment, k: int) -> tuple[float, float]:
    _require_judgment(judgment, k)
    hits = sum(1 for cid in result.chunk_ids[:k] if cid in judgment.relevant_chunk_ids)
    return hits / k, hits / len(judgment.relevant_chunk_ids)


def ndcg_at_k(result: RetrievalResult, judgment: RelevanceJudgment, k: int) -> float:
    _require_judgment(judgment, k)
    dcg = sum(
        1.0 / math.log2(rank + 1)
        for rank, cid in enumerate(result.chunk_ids[:k], start=1)
        if cid in judgment.relevant_chunk_ids
    )
    ideal = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(k, len(judgment.relevant_chunk_ids)) + 1))
    return dcg / ideal


def hierarchy_f1(pred: HierarchyAssignment, gold: HierarchyAssignment) -> float:
    """F1 over (id, parent) edges; roots count as edges to null."""
    pred_edges = set(pred.parents.items())
    gold_edges = set(gold.parents.items())
    if not pred_edges and not gold_edges:
        return 1.0
    if not set(pred.parents) & set(gold.parents):
        raise ValueError("predicted and gold assignments share no ids")
    matched = len(pred_edges & gold_edges)
    if matched == 0:
        return 0.0
    precision = matched / len(pred_edges)
    recall = matched / len(gold_edges)
    return 2 * precision * recall / (precision + recall)


# (label, children): a plain ordered labelled tree
LabeledTree = tuple[Any, tuple["LabeledTree", ...]]


def _text_key(text: str) -> str:
    return " ".join(text.lower().split())


def labeled_tree(tree: DocumentTree) -> LabeledTree:
    def build(node_id: str) -> LabeledTree:
        node = tree.nodes[node_id]
        return ((node.kind.value, _text_key(node.text)), tuple(build(c) for c in node.children))

    return build(tree.root_id)


def _postorder(tree: LabeledTree) -> tuple[list[Any], list[int]]:
    """Postorder labels and leftmost-leaf indices (0-based)."""
    labels: list[Any] = []
    leftmost: list[int] = []

    def walk(node: LabeledTree) -> int:
        label, children = node
        first = None
        for child in children:
            lm = walk(child)
            if first is None:
                first = lm
        labels.append(label)
        leftmost.append(len(labels) - 1 if first is None else first)
        return leftmost[-1]

    walk(tree)
    return labels, leftmost


def _keyroots(leftmost: list[int]) -> list[int]:
    seen: dict[int, int] = {}
    for i, lm in enumerate(leftmost):
        seen[lm] = i  # highest postorder index per leftmost leaf
    return sorted(seen.values())


def tree_edit_distance(a: LabeledTree, b: LabeledTree) -> int:
    """Zhang-Shasha ordered tree edit distance with unit insert/delete/rename costs."""
    la, lma = _postorder(a)
    lb, lmb = _postorder(b)
    n, m = len(la), len(lb)
    td = [[0] * m for _ in range(n)]
    for i in _keyroots(lma):
        for j in _keyroots(lmb):
            ioff, joff = lma[i], lmb[j]
            rows, cols = i - ioff + 2, j - joff + 2
            fd = [[0] * cols for _ in range(rows)]
            for x in range(1, rows):
                fd[x][0] = x
            for y in range(1, cols):
                fd[0][y] = y
            for x in range(1, rows):
                ni = x + ioff - 1
                for y in range(1, cols):
                    nj = y + joff - 1
                    if lma[ni] == ioff and lmb[nj] == joff:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[x - 1][y - 1] + (la[ni] != lb[nj]),
                        )
                        td[ni][nj] = fd[x][y]
                    else:
                        fd[x][y] = min(
                            fd[x - 1][y] + 1,
                            fd[x][y - 1] + 1,
                            fd[lma[ni] - ioff][lmb[nj] - joff] + td[ni][nj],
                        )
    return td[n - 1][m - 1]


def tree_size(tree: LabeledTree) -> int:
    return 1 + sum(tree_size(c) for c in tree[1])


def teds(pred: Union[DocumentTree, LabeledTree], gold: Union[DocumentTree, LabeledTree]) -> float:
    """Tree edit distance similarity, 1 - TED / max(|pred|, |gold|)."""
    a = labeled_tree(pred) if isinstance(pred, DocumentTree) else pred
    b = labeled_tree(gold) if isinstance(gold, DocumentTree) else gold
    return 1.0 - tree_edit_distance(a, b) / max(tree_size(a), tree_size(b))


def levenshtein(s: str, t: str) -> int:
    if len(s) < len(t):
        s, t = t, s
    previous = list(range(len(t) + 1))
    for i, cs in enumerate(s, start=1):
        current = [i]
        for j, ct in enumerate(t, start=1):
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + (cs != ct)))
        previous = current
    return previous[-1]


def _anls_one(prediction: str, gold: str, threshold: float) -> float:
    p = " ".join(prediction.strip().lower().split())
    g = " ".join(gold.strip().lower().split())
    longest = max(len(p), len(g))
    if longest == 0:
        return 1.0
    similarity = 1.0 - levenshtein(p, g) / longest
    return similarity if similarity >= threshold else 0.0


def anls(prediction: str, golds: Sequence[str], threshold: float = 0.5) -> float:
    """Best thresholded normalized Levenshtein similarity against any gold answer (case-insensitive)."""
    if not golds:
        raise ValueError("anls needs at least one gold answer")
    return max(_anls_one(prediction, g, threshold) for g in golds)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    row = [0] * (len(b) + 1)
    for x in a:
        prev_diag = 0
        for j, y in enumerate(b, start=1):
            keep = row[j]
            row[j] = prev_diag + 1 if x == y else max(row[j], row[j - 1])
            prev_diag = keep
    return row[-1]


def rouge_l(prediction: str, gold: str) -> float:
    """ROUGE-L F1 (beta = 1) over lowercased whitespace tokens."""
    p, g = prediction.lower().split(), gold.lower().split()
    if not p or not g:
        return 0.0
    lcs = lcs_length(p, g)
    if lcs == 0:
        return 0.0
    precision, recall = lcs / len(p), lcs / len(g)
    return 2 * precision * recall / (precision + recall)
