"""Corpus-level BM25 over chunks.

All chunks of all documents go into one index. Terms are lowercased
whitespace runs with leading/trailing punctuation removed; IDF is the
non-negative ``ln((N - df + 0.5) / (df + 0.5) + 1)`` variant.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from hierchunk.chunker import Chunk

INDEX_FORMAT = "hierchunk-bm25"
INDEX_FORMAT_VERSION = 1


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(text: str) -> list[str]:
    terms = []
    for run in text.lower().split():
        start, end = 0, len(run)
        while start < end and _is_punct(run[start]):
            start += 1
        while end > start and _is_punct(run[end - 1]):
            end -= 1
        if start < end:
            terms.append(run[start:end])
    return terms


def idf(n_docs: int, df: int) -> float:
    return math.log((n_docs - df + 0.5) / (df + 0.5) + 1.0)


@dataclass
class Bm25Index:
    postings: dict[str, list[tuple[int, int]]]
    doc_lengths: list[int]
    chunk_ids: list[str]
    k1: float = 1.2
    b: float = 0.75
    avg_doc_length: float = field(init=False)

    def __post_init__(self):
        if len(self.doc_lengths) != len(self.chunk_ids):
            raise ValueError("doc_lengths and chunk_ids must align")
        if not self.chunk_ids:
            raise ValueError("cannot build a BM25 index over an empty corpus")
        if self.k1 <= 0 or not 0 <= self.b <= 1:
            raise ValueError(f"invalid BM25 parameters k1={self.k1}, b={self.b}")
        self.avg_doc_length = sum(self.doc_lengths) / len(self.doc_lengths)
        if self.avg_doc_length == 0:
            raise ValueError("cannot build a BM25 index: no chunk contains any indexable term")

    @property
    def n_docs(self) -> int:
        return len(self.chunk_ids)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        return idf(self.n_docs, self.df(term))

    def to_dict(self) -> dict:
        return {
            "format": INDEX_FORMAT,
            "format_version": INDEX_FORMAT_VERSION,
            "k1": self.k1,
            "b": self.b,
            "chunk_ids": self.chunk_ids,
            "doc_lengths": self.doc_lengths,
            "postings": {t: [list(p) for p in plist] for t, plist in sorted(self.postings.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Bm25Index":
        return cls(
            postings={t: [(int(o), int(f)) for o, f in plist] for t, plist in d["postings"].items()},
            doc_lengths=list(d["doc_lengths"]),
            chunk_ids=list(d["chunk_ids"]),
            k1=float(d["k1"]),
            b=float(d["b"]),
        )


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    hits: tuple[tuple[str, float], ...]

    @property
    def chunk_ids(self) -> list[str]:
        return [cid for cid, _ in self.hits]

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "hits": [{"chunk_id": c, "score": s} for c, s in self.hits]}

    @classmethod
    def from_dict(cls, d: dict) -> "RetrievalResult":
        return cls(d["query_id"], tuple((h["chunk_id"], float(h["score"])) for h in d["hits"]))


def build_bm25_index(chunks: Iterable[Chunk], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    postings: dict[str, list[tuple[int, int]]] = defaultdict(list)
    doc_lengths: list[int] = []
    chunk_ids: list[str] = []
    for ordinal, chunk in enumerate(chunks):
        terms = tokenize(chunk.text)
        for term, tf in Counter(terms).items():
            postings[term].append((ordinal, tf))
        doc_lengths.append(len(terms))
        chunk_ids.append(chunk.chunk_id)
    if len(set(chunk_ids)) != len(chunk_ids):
        raise ValueError("chunk ids must be unique across the corpus")
    return Bm25Index(dict(postings), doc_lengths, chunk_ids, k1, b)


def score_all(index: Bm25Index, question: str) -> dict[int, float]:
    """Score every chunk sharing at least one term with the question (duplicate query terms count twice)."""
    scores: dict[int, float] = defaultdict(float)
    k1, b, avg = index.k1, index.b, index.avg_doc_length
    for term in tokenize(question):
        plist = index.postings.get(term)
        if not plist:
            continue
        w = index.idf(term)
        for ordinal, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[ordinal] / avg)
            scores[ordinal] += w * tf * (k1 + 1.0) / (tf + norm)
    return scores


def query(index: Bm25Index, question: str, k: int = 4, query_id: str = "") -> RetrievalResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [(index.chunk_ids[o], s) for o, s in score_all(index, question).items() if s > 0]
    scored.sort(key=lambda hit: (-hit[1], hit[0]))
    return RetrievalResult(query_id, tuple(scored[:k]))


def query_many(index: Bm25Index, questions: Sequence[tuple[str, str]], k: int = 4) -> list[RetrievalResult]:
    return [query(index, text, k, query_id=qid) for qid, text in questions]
