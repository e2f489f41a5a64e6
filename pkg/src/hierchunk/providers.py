"""Sources of header hierarchy assignments: heuristic, precomputed file, or an LLM endpoint."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

import httpx

from hierchunk.errors import AssignmentError, HierchunkError
from hierchunk.hierarchy import HierarchyAssignment, assignment_from_list, heuristic_hierarchy, parse_assignment
from hierchunk.layout import Segment

log = logging.getLogger(__name__)

SYSTEM_PROMPT = """You are an expert in analyzing section headers of documents and creating a hierarchical structure.
The following is a list of 'section header' texts extracted from a document.

For each item, determine its relationship with the parent section (parent-child relationship).

If possible, follow standard document numbering rules, such as treating '3.1' as a child of '3' and '3.1.1' as a child of '3.1'.

Even if there is no numeric pattern, infer hierarchy based on textual context.

If an item is a top-level heading (i.e., the root node is its parent), set `parent` to null.

Output format:

json only.

DO NOT include any other explanations or text.

[

{"id": "<id from the original header_list>", "parent": "<id of the parent node or null if root>"}

]
"""


class ProviderKind(str, Enum):
    HEURISTIC = "heuristic"
    FILE = "file"
    LLM = "llm"


class ProviderError(HierchunkError):
    pass


@dataclass(frozen=True)
class ProviderConfig:
    kind: ProviderKind = ProviderKind.HEURISTIC
    file_path: str | None = None
    endpoint_url: str | None = None
    model_name: str | None = None
    api_key_env_var: str | None = None
    request_timeout_seconds: float = 60.0
    max_retries: int = 2
    max_concurrent_requests: int = 4

    def __post_init__(self):
        object.__setattr__(self, "kind", ProviderKind(self.kind))
        if self.kind is ProviderKind.FILE and not self.file_path:
            raise ValueError("file provider requires file_path")
        if self.kind is ProviderKind.LLM and not (self.endpoint_url and self.model_name):
            raise ValueError("llm provider requires endpoint_url and model_name")
        if self.request_timeout_seconds <= 0:
            raise ValueError("request_timeout_seconds must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ProviderConfig":
        return cls(**data)


@dataclass(frozen=True)
class PromptBundle:
    system_prompt: str
    user_payload: str


def build_prompt(headers: Sequence[Segment]) -> PromptBundle:
    if not headers:
        raise ValueError("cannot build a hierarchy prompt from an empty header list")
    records = [
        {"id": h.id, "text": h.text, "page_number": h.bbox.page_number, "top": h.bbox.top, "left": h.bbox.left}
        for h in headers
    ]
    return PromptBundle(SYSTEM_PROMPT, json.dumps(records, ensure_ascii=False))


@lru_cache(maxsize=8)
def _load_assignment_file(path: str, mtime: float) -> dict[str, Any]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ProviderError(f"{path}: expected a JSON object mapping document_id to assignment entries")
    return data


def _from_file(config: ProviderConfig, headers: Sequence[Segment], document_id: str) -> HierarchyAssignment:
    path = Path(config.file_path)
    try:
        table = _load_assignment_file(str(path), path.stat().st_mtime)
    except OSError as exc:
        raise ProviderError(f"cannot read assignment file {path}: {exc}") from exc
    if document_id not in table:
        raise ProviderError(f"assignment file {path} has no entry for document {document_id!r}")
    return assignment_from_list(table[document_id], known_ids=[h.id for h in headers], source="file")


def _check_ids(assignment: HierarchyAssignment, header_ids: set[str]) -> None:
    for entry in assignment.entries:
        if entry.id not in header_ids:
            raise AssignmentError(f"assignment names {entry.id!r}, which is not a header")


def _reply_text(payload: Any) -> str:
    choice = payload["choices"][0]
    if isinstance(choice.get("message"), dict):
        return choice["message"]["content"]
    return choice["text"]


def _from_llm(
    config: ProviderConfig, headers: Sequence[Segment], client: httpx.Client | None
) -> HierarchyAssignment:
    prompt = build_prompt(headers)
    body = {
        "model": config.model_name,
        "messages": [
            {"role": "system", "content": prompt.system_prompt},
            {"role": "user", "content": prompt.user_payload},
        ],
        "temperature": 0,
    }
    request_headers = {"Content-Type": "application/json"}
    if config.api_key_env_var and os.environ.get(config.api_key_env_var):
        request_headers["Authorization"] = f"Bearer {os.environ[config.api_key_env_var]}"
    header_ids = {h.id for h in headers}
    own_client = client is None
    client = client or httpx.Client(timeout=config.request_timeout_seconds)
    last_error = "no attempt made"
    try:
        for attempt in range(config.max_retries + 1):
            try:
                resp = client.post(
                    config.endpoint_url, json=body, headers=request_headers, timeout=config.request_timeout_seconds
                )
                resp.raise_for_status()
                assignment = parse_assignment(_reply_text(resp.json()), known_ids=header_ids, source="llm")
                _check_ids(assignment, header_ids)
                return assignment
            except (httpx.HTTPError, AssignmentError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.info("hierarchy request attempt %d failed: %s", attempt + 1, last_error)
    finally:
        if own_client:
            client.close()
    log.warning("LLM hierarchy failed after %d attempts (%s); using heuristic", config.max_retries + 1, last_error)
    fallback = heuristic_hierarchy(headers)
    return HierarchyAssignment(fallback.entries, source="heuristic-fallback", fallback_reason=last_error)


def resolve_hierarchy(
    config: ProviderConfig,
    headers: Sequence[Segment],
    document_id: str = "",
    *,
    client: httpx.Client | None = None,
) -> HierarchyAssignment:
    """Produce a validated assignment for one document's headers.

    LLM failures (transport errors, unparsable or invalid replies) are retried
    ``max_retries`` times and then replaced by the heuristic; the returned
    assignment's ``fallback_reason`` records why. File lookups that miss raise
    ProviderError.
    """
    if config.kind is ProviderKind.HEURISTIC:
        return heuristic_hierarchy(headers)
    if config.kind is ProviderKind.FILE:
        return _from_file(config, headers, document_id)
    if not headers:
        return HierarchyAssignment((), source="llm")
    return _from_llm(config, headers, client)


def resolve_many(
    config: ProviderConfig, documents: Sequence[tuple[str, Sequence[Segment]]]
) -> list[HierarchyAssignment | Exception]:
    """Resolve several documents, keeping input order; per-document errors are returned, not raised."""

    def one(item: tuple[str, Sequence[Segment]]) -> HierarchyAssignment | Exception:
        doc_id, headers = item
        try:
            return resolve_hierarchy(config, headers, doc_id, client=client)
        except HierchunkError as exc:
            return exc

    if config.kind is not ProviderKind.LLM:
        client = None
        return [one(item) for item in documents]
    with httpx.Client(timeout=config.request_timeout_seconds) as client:
        with ThreadPoolExecutor(max_workers=config.max_concurrent_requests) as pool:
            return list(pool.map(one, documents))
