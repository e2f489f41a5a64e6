"""Hierarchy-aware document chunking and BM25 retrieval evaluation.

Subcommands: tree, chunk, index, retrieve, eval, pipeline, stats, synth.

Exit codes: 0 success, 1 total failure, 2 partial failure (some documents skipped).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from hierchunk import pipeline, store
from hierchunk.chunker import ChunkConfig, ChunkMethod, chunk_stats
from hierchunk.errors import HierchunkError
from hierchunk.evaluation import format_report
from hierchunk.providers import ProviderConfig, ProviderKind

log = logging.getLogger("hierchunk")

DEFAULTS: dict[str, Any] = {
    "method": "multidocfusion",
    "max_len": 550,
    "token_counter": "whitespace",
    "provider": "heuristic",
    "assignments": None,
    "endpoint": None,
    "model": None,
    "api_key_env": None,
    "timeout": 60.0,
    "retries": 2,
    "concurrency": 4,
    "k": 4,
    "k1": 1.2,
    "b": 0.75,
    "jobs": 1,
}


def effective_config(args: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then the --config file, then explicit flags."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(file_cfg) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown keys in {args.config}: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def provider_config(cfg: dict[str, Any]) -> ProviderConfig:
    return ProviderConfig(
        kind=ProviderKind(cfg["provider"]),
        file_path=cfg["assignments"],
        endpoint_url=cfg["endpoint"],
        model_name=cfg["model"],
        api_key_env_var=cfg["api_key_env"],
        request_timeout_seconds=float(cfg["timeout"]),
        max_retries=int(cfg["retries"]),
        max_concurrent_requests=int(cfg["concurrency"]),
    )


def chunk_config(cfg: dict[str, Any]) -> ChunkConfig:
    return ChunkConfig(max_len=int(cfg["max_len"]), method=ChunkMethod(cfg["method"]), token_counter=cfg["token_counter"])


def _add_common(p: argparse.ArgumentParser, *, out: bool = True) -> None:
    p.add_argument("--config", help="JSON file of option values; flags override it")
    p.add_argument("--jobs", type=int, help="document-level worker processes")
    if out:
        p.add_argument("--out", required=True, type=Path, help="run directory")


def _add_provider(p: argparse.ArgumentParser) -> None:
    p.add_argument("--provider", choices=[k.value for k in ProviderKind])
    p.add_argument("--assignments", help="file provider: JSON map of document_id to [{id, parent}]")
    p.add_argument("--endpoint", help="llm provider: chat-completions URL")
    p.add_argument("--model", help="llm provider: model name")
    p.add_argument("--api-key-env", dest="api_key_env", help="llm provider: env var holding the bearer token")
    p.add_argument("--timeout", type=float, help="llm provider: per-request timeout in seconds")
    p.add_argument("--retries", type=int, help="llm provider: retries before heuristic fallback")
    p.add_argument("--concurrency", type=int, help="llm provider: max in-flight requests")


def _add_chunking(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=[m.value for m in ChunkMethod])
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--token-counter", dest="token_counter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hierchunk", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tree", help="build document trees from layouts")
    p.add_argument("--layouts", required=True, type=Path)
    _add_provider(p)
    _add_common(p)

    p = sub.add_parser("chunk", help="chunk trees (multidocfusion) or layouts (baselines)")
    p.add_argument("--layouts", type=Path)
    p.add_argument("--trees", type=Path, help="tree directory (default: <out>/trees)")
    _add_chunking(p)
    _add_common(p)

    p = sub.add_parser("index", help="build the corpus BM25 index")
    p.add_argument("--chunks", required=True, type=Path)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    _add_common(p)

    p = sub.add_parser("retrieve", help="top-k retrieval for every QA question")
    p.add_argument("--index", required=True, type=Path)
    p.add_argument("--qa", required=True, type=Path)
    p.add_argument("--k", type=int)
    _add_common(p)

    p = sub.add_parser("eval", help="compute the evaluation report")
    p.add_argument("--results", required=True, type=Path)
    p.add_argument("--qa", required=True, type=Path)
    p.add_argument("--chunks", required=True, type=Path)
    p.add_argument("--layouts", type=Path, help="layouts, needed for page-level evidence")
    p.add_argument("--trees", type=Path, help="predicted trees (default: <out>/trees)")
    p.add_argument("--gold-trees", dest="gold_trees", type=Path)
    p.add_argument("--predictions", type=Path, help="JSONL of {query_id, answer}")
    _add_common(p)

    p = sub.add_parser("pipeline", help="tree -> chunk -> index -> retrieve -> eval")
    p.add_argument("--layouts", required=True, type=Path)
    p.add_argument("--qa", required=True, type=Path)
    p.add_argument("--gold-trees", dest="gold_trees", type=Path)
    p.add_argument("--predictions", type=Path)
    _add_provider(p)
    _add_chunking(p)
    p.add_argument("--k", type=int)
    p.add_argument("--k1", type=float)
    p.add_argument("--b", type=float)
    _add_common(p)

    p = sub.add_parser("stats", help="chunk statistics (count, avg chars, avg tokens)")
    p.add_argument("chunks", nargs="+", type=Path)

    p = sub.add_parser("synth", help="write the synthetic report corpus")
    p.add_argument("--documents", type=int, default=30)
    p.add_argument("--questions", type=int, default=2, help="questions per document")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out", required=True, type=Path)
    return parser


def _print_stats(chunks) -> None:
    print(chunk_stats(chunks).as_row("chunks"))


def cmd_tree(args, cfg) -> int:
    outcome = pipeline.stage_tree(args.layouts, args.out, provider_config(cfg), jobs=int(cfg["jobs"]))
    print(f"trees: {outcome.documents - len(outcome.failures)}/{outcome.documents} documents, {outcome.fallback_count} fallbacks")
    return outcome.exit_code


def cmd_chunk(args, cfg) -> int:
    outcome, chunks = pipeline.stage_chunk(
        args.out, chunk_config(cfg), layout_dir=args.layouts, tree_dir=args.trees, jobs=int(cfg["jobs"])
    )
    _print_stats(chunks)
    return outcome.exit_code


def cmd_index(args, cfg) -> int:
    path = pipeline.stage_index(args.chunks, args.out, k1=float(cfg["k1"]), b=float(cfg["b"]))
    print(f"index: {path}")
    return 0


def cmd_retrieve(args, cfg) -> int:
    path = pipeline.stage_retrieve(args.index, args.qa, args.out, k=int(cfg["k"]))
    print(f"results: {path}")
    return 0


def cmd_eval(args, cfg) -> int:
    report = pipeline.stage_eval(
        args.results,
        args.qa,
        args.chunks,
        args.out,
        layout_dir=args.layouts,
        tree_dir=args.trees,
        gold_tree_dir=args.gold_trees,
        predictions_path=args.predictions,
    )
    print(format_report(report), end="")
    return 0


def cmd_pipeline(args, cfg) -> int:
    config = chunk_config(cfg)
    out = args.out
    exit_code = 0
    if config.method is ChunkMethod.MULTIDOCFUSION:
        outcome = pipeline.stage_tree(args.layouts, out, provider_config(cfg), jobs=int(cfg["jobs"]))
        exit_code = outcome.exit_code
        if exit_code == 1:
            return 1
    outcome, chunks = pipeline.stage_chunk(out, config, layout_dir=args.layouts, jobs=int(cfg["jobs"]))
    _print_stats(chunks)
    exit_code = max(exit_code, outcome.exit_code)
    pipeline.stage_index(out / pipeline.CHUNKS, out, k1=float(cfg["k1"]), b=float(cfg["b"]))
    pipeline.stage_retrieve(out / pipeline.INDEX, args.qa, out, k=int(cfg["k"]))
    report = pipeline.stage_eval(
        out / pipeline.RESULTS,
        args.qa,
        out / pipeline.CHUNKS,
        out,
        layout_dir=args.layouts,
        gold_tree_dir=args.gold_trees,
        predictions_path=args.predictions,
    )
    print(format_report(report), end="")
    return exit_code


def cmd_stats(args, cfg) -> int:
    for line in pipeline.stats_lines(args.chunks):
        print(line)
    return 0


def cmd_synth(args, cfg) -> int:
    from hierchunk.synthetic import report_corpus

    layouts, qa = report_corpus(args.documents, args.questions, args.seed)
    for lay in layouts:
        store.write_layout(args.out / "layouts" / f"{lay.document_id}.json", lay)
    store.write_jsonl(args.out / "qa.jsonl", (q.to_dict() for q in qa))
    print(f"wrote {len(layouts)} layouts and {len(qa)} questions to {args.out}")
    return 0


COMMANDS = {
    "tree": cmd_tree,
    "chunk": cmd_chunk,
    "index": cmd_index,
    "retrieve": cmd_retrieve,
    "eval": cmd_eval,
    "pipeline": cmd_pipeline,
    "stats": cmd_stats,
    "synth": cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](args, cfg)
    except (HierchunkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
