"""Assemble a run's evaluation report from retrieval results and the optional tree and answer inputs."""

from __future__ import annotations

from statistics import fmean
from typing import Any, Mapping, Sequence

from hierchunk.chunker import Chunk
from hierchunk.hierarchy import DocumentTree, tree_to_assignment
from hierchunk.metrics import (
    LayoutIndex,
    QaRecord,
    RelevanceLabeler,
    anls,
    hierarchy_f1,
    ndcg_at_k,
    precision_recall_at_k,
    rouge_l,
    teds,
)
from hierchunk.retrieval import RetrievalResult

KS = (1, 2, 3, 4)


def _mean(values: Sequence[float]) -> float:
    return fmean(values) if values else 0.0


def retrieval_metrics(
    results: Sequence[RetrievalResult],
    qa: Sequence[QaRecord],
    chunks: Sequence[Chunk],
    layout_index: LayoutIndex | None = None,
    ks: Sequence[int] = KS,
) -> dict[str, Any]:
    """Per-k precision/recall/nDCG averaged over queries, plus the mean across k.

    Queries without any relevant chunk, or without a result row, are skipped and listed.
    """
    by_query = {r.query_id: r for r in results}
    labeler = RelevanceLabeler(chunks, layout_index)
    per_k: dict[str, dict[int, list[float]]] = {m: {k: [] for k in ks} for m in ("precision", "recall", "ndcg")}
    skipped: list[str] = []
    missing: list[str] = []
    for rec in qa:
        result = by_query.get(rec.query_id)
        if result is None:
            missing.append(rec.query_id)
            continue
        judgment = labeler.label(rec)
        if not judgment.relevant_chunk_ids:
            skipped.append(rec.query_id)
            continue
        for k in ks:
            p, r = precision_recall_at_k(result, judgment, k)
            per_k["precision"][k].append(p)
            per_k["recall"][k].append(r)
            per_k["ndcg"][k].append(ndcg_at_k(result, judgment, k))
    out: dict[str, Any] = {
        "queries_total": len(qa),
        "queries_scored": len(qa) - len(skipped) - len(missing),
        "queries_without_relevant_chunks": skipped,
        "queries_without_results": missing,
    }
    for metric, table in per_k.items():
        means = {str(k): _mean(vals) for k, vals in table.items()}
        means["avg"] = _mean([means[str(k)] for k in ks])
        out[metric] = means
    return out


def hierarchy_metrics(pred: Mapping[str, DocumentTree], gold: Mapping[str, DocumentTree]) -> dict[str, Any]:
    shared = sorted(set(pred) & set(gold))
    teds_scores, f1_scores = [], []
    for doc_id in shared:
        teds_scores.append(teds(pred[doc_id], gold[doc_id]))
        pa, ga = tree_to_assignment(pred[doc_id]), tree_to_assignment(gold[doc_id])
        f1_scores.append(hierarchy_f1(pa, ga) if (pa.entries or ga.entries) else 1.0)
    return {
        "documents": len(shared),
        "missing_predictions": sorted(set(gold) - set(pred)),
        "teds": _mean(teds_scores),
        "f1": _mean(f1_scores),
    }


def answer_metrics(predictions: Mapping[str, str], qa: Sequence[QaRecord]) -> dict[str, Any]:
    anls_scores, rouge_scores = [], []
    for rec in qa:
        if rec.query_id not in predictions:
            continue
        answer = predictions[rec.query_id]
        anls_scores.append(anls(answer, rec.gold_answers))
        rouge_scores.append(max(rouge_l(answer, g) for g in rec.gold_answers))
    return {"predictions": len(anls_scores), "anls": _mean(anls_scores), "rouge_l": _mean(rouge_scores)}


def build_report(
    results: Sequence[RetrievalResult],
    qa: Sequence[QaRecord],
    chunks: Sequence[Chunk],
    *,
    layout_index: LayoutIndex | None = None,
    run: Mapping[str, Any] | None = None,
    pred_trees: Mapping[str, DocumentTree] | None = None,
    gold_trees: Mapping[str, DocumentTree] | None = None,
    predictions: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    report: dict[str, Any] = {"run": dict(run or {})}
    report["retrieval"] = retrieval_metrics(results, qa, chunks, layout_index)
    if gold_trees is not None and pred_trees is not None:
        report["hierarchy"] = hierarchy_metrics(pred_trees, gold_trees)
    if predictions is not None:
        report["answers"] = answer_metrics(predictions, qa)
    return report


def format_report(report: Mapping[str, Any]) -> str:
    """Plain-text table: one row per retrieval metric, columns k=1..4 and Avg."""
    retrieval = report["retrieval"]
    run = report.get("run", {})
    lines = []
    if run:
        lines.append("  ".join(f"{k}={v}" for k, v in run.items()))
    header = f"{'Metric':<10}" + "".join(f"{'k=' + str(k):>9}" for k in KS) + f"{'Avg':>9}"
    lines += [header, "-" * len(header)]
    for metric, label in (("recall", "Recall"), ("precision", "Precision"), ("ndcg", "nDCG")):
        row = retrieval[metric]
        lines.append(f"{label:<10}" + "".join(f"{row[str(k)]:>9.4f}" for k in KS) + f"{row['avg']:>9.4f}")
    lines.append(
        f"queries: {retrieval['queries_scored']} scored / {retrieval['queries_total']} total"
        f" ({len(retrieval['queries_without_relevant_chunks'])} without relevant chunks)"
    )
    if "hierarchy" in report:
        h = report["hierarchy"]
        lines.append(f"hierarchy: TEDS={h['teds']:.4f}  F1={h['f1']:.4f}  over {h['documents']} documents")
    if "answers" in report:
        a = report["answers"]
        lines.append(f"answers: ANLS={a['anls']:.4f}  ROUGE-L={a['rouge_l']:.4f}  over {a['predictions']} predictions")
    return "\n".join(lines) + "\n"
