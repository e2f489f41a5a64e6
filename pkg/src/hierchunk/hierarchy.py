"""Header hierarchies and the document tree.

A hierarchy assignment gives every section header a parent header (or null for
top-level headers). The document tree is built in two passes: headers are
arranged under a virtual ``FAKE_ROOT`` according to the assignment, then every
non-header segment is attached under the header that most recently precedes it
in reading order.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator, Sequence

from hierchunk.errors import AssignmentError, CycleError
from hierchunk.layout import AnnotatedLayout, Segment, SegmentType, extract_header_list

ROOT_ID = "FAKE_ROOT"


@dataclass(frozen=True)
class AssignmentEntry:
    id: str
    parent: str | None


@dataclass(frozen=True)
class HierarchyAssignment:
    entries: tuple[AssignmentEntry, ...]
    # which provider produced this; "heuristic-fallback" marks a failed LLM call
    source: str = "unknown"
    fallback_reason: str | None = None

    @property
    def fallback(self) -> bool:
        return self.fallback_reason is not None

    @property
    def parents(self) -> dict[str, str | None]:
        return {e.id: e.parent for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def roots(self) -> list[str]:
        return [e.id for e in self.entries if e.parent is None]

    def to_list(self) -> list[dict[str, str | None]]:
        return [{"id": e.id, "parent": e.parent} for e in self.entries]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str | None]], **kwargs: Any) -> "HierarchyAssignment":
        return cls(tuple(AssignmentEntry(i, p) for i, p in pairs), **kwargs)


class NodeKind(str, Enum):
    FAKE_ROOT = "FakeRoot"
    HEADER = "Header"
    GENERAL = "General"


@dataclass
class TreeNode:
    id: str
    kind: NodeKind
    segment_type: SegmentType | None
    text: str
    children: list[str] = field(default_factory=list)
    depth: int = 0
    parent: str | None = None


@dataclass
class DocumentTree:
    nodes: dict[str, TreeNode]
    root_id: str = ROOT_ID

    @property
    def root(self) -> TreeNode:
        return self.nodes[self.root_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def __getitem__(self, node_id: str) -> TreeNode:
        return self.nodes[node_id]

    def preorder(self) -> Iterator[TreeNode]:
        stack = [self.root_id]
        while stack:
            node = self.nodes[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def ancestors(self, node_id: str) -> list[TreeNode]:
        """Ancestors of ``node_id`` from the shallowest (excluding FAKE_ROOT) down to its parent."""
        chain = []
        parent = self.nodes[node_id].parent
        while parent is not None and parent != self.root_id:
            chain.append(self.nodes[parent])
            parent = self.nodes[parent].parent
        chain.reverse()
        return chain

    def copy(self) -> "DocumentTree":
        return DocumentTree(
            nodes={
                k: TreeNode(n.id, n.kind, n.segment_type, n.text, list(n.children), n.depth, n.parent)
                for k, n in self.nodes.items()
            },
            root_id=self.root_id,
        )

    def to_dict(self) -> dict[str, Any]:
        def render(node_id: str) -> dict[str, Any]:
            node = self.nodes[node_id]
            return {
                "id": node.id,
                "kind": node.kind.value,
                "segment_type": node.segment_type.value if node.segment_type else None,
                "text": node.text,
                "children": [render(c) for c in node.children],
            }

        return render(self.root_id)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DocumentTree":
        nodes: dict[str, TreeNode] = {}
        # iterative to survive deep trees
        stack: list[tuple[dict[str, Any], str | None, int]] = [(data, None, 0)]
        order: list[tuple[str, str | None]] = []
        while stack:
            rec, parent, depth = stack.pop()
            seg_type = rec.get("segment_type")
            node = TreeNode(
                id=str(rec["id"]),
                kind=NodeKind(rec["kind"]),
                segment_type=SegmentType(seg_type) if seg_type else None,
                text=rec.get("text", ""),
                depth=depth,
                parent=parent,
            )
            if node.id in nodes:
                raise ValueError(f"duplicate node id {node.id!r} in tree")
            nodes[node.id] = node
            order.append((node.id, parent))
            for child in reversed(rec.get("children", [])):
                stack.append((child, node.id, depth + 1))
        for node_id, parent in order:
            if parent is not None:
                nodes[parent].children.append(node_id)
        root_id = str(data["id"])
        if nodes[root_id].kind is not NodeKind.FAKE_ROOT:
            raise ValueError("tree root must be a FakeRoot node")
        return cls(nodes=nodes, root_id=root_id)


def strip_llm_wrapper(text: str) -> str:
    """Reduce an LLM reply to its single JSON array, dropping fences and chatter."""
    text = text.strip()
    fenced = re.search(r"```(?:json|JSON)?\s*(.*?)```", text, flags=re.S)
    if fenced:
        text = fenced.group(1).strip()
    start, end = text.find("["), text.rfind("]")
    if start != -1 and end > start:
        return text[start : end + 1]
    return text


def _find_cycle(parents: dict[str, str | None]) -> list[str] | None:
    state: dict[str, int] = {}  # 1 = on current path, 2 = done
    for start in parents:
        if state.get(start) == 2:
            continue
        path: list[str] = []
        node: str | None = start
        while node is not None and node in parents and state.get(node) != 2:
            if state.get(node) == 1:
                return path[path.index(node):]
            state[node] = 1
            path.append(node)
            node = parents[node]
        for n in path:
            state[n] = 2
    return None


def validate_assignment(assignment: HierarchyAssignment, known_ids: Iterable[str] = ()) -> None:
    """Raise AssignmentError unless ids are unique, parents resolve, and the graph is acyclic."""
    ids: set[str] = set()
    for entry in assignment.entries:
        if entry.id in ids:
            raise AssignmentError(f"duplicate id {entry.id!r} in hierarchy assignment")
        ids.add(entry.id)
    resolvable = ids | set(known_ids)
    for entry in assignment.entries:
        if entry.parent is not None and entry.parent not in resolvable:
            raise AssignmentError(f"entry {entry.id!r} references unknown parent {entry.parent!r}")
    cycle = _find_cycle(assignment.parents)
    if cycle:
        raise CycleError(cycle)


def _as_id(value: Any, what: str, index: int) -> str:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise AssignmentError(f"entry {index}: {what} must be a string, got {value!r}")
    return str(value)


def parse_assignment(raw: bytes | str, known_ids: Iterable[str] = (), source: str = "unknown") -> HierarchyAssignment:
    """Parse and validate a ``[{"id": ..., "parent": ...}]`` array.

    Code fences or prose around the array are stripped first. ``known_ids`` lists
    header ids that parents may reference even when absent from the array.
    """
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    body = strip_llm_wrapper(raw)
    try:
        data = json.loads(body)
    except json.JSONDecodeError as exc:
        raise AssignmentError(f"hierarchy assignment is not valid JSON: {exc.msg} at offset {exc.pos}") from exc
    return assignment_from_list(data, known_ids=known_ids, source=source)


def assignment_from_list(data: Any, known_ids: Iterable[str] = (), source: str = "unknown") -> HierarchyAssignment:
    if not isinstance(data, list):
        raise AssignmentError("hierarchy assignment must be a JSON array")
    entries = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict) or "id" not in rec:
            raise AssignmentError(f"entry {i}: expected an object with an 'id' field")
        parent = rec.get("parent")
        if isinstance(parent, str) and parent.strip().lower() in ("", "null", "none"):
            parent = None
        entries.append(
            AssignmentEntry(
                id=_as_id(rec["id"], "id", i),
                parent=None if parent is None else _as_id(parent, "parent", i),
            )
        )
    assignment = HierarchyAssignment(tuple(entries), source=source)
    validate_assignment(assignment, known_ids)
    return assignment


_NUMBER_PREFIX = re.compile(r"^\s*(\d+(?:\.\d+)*)\.?(?=\s|$)")


def section_number(text: str) -> tuple[int, ...] | None:
    """Leading dotted section number of a header, e.g. ``"3.1. Scope"`` -> ``(3, 1)``."""
    m = _NUMBER_PREFIX.match(text)
    if not m:
        return None
    return tuple(int(part) for part in m.group(1).split("."))


def heuristic_hierarchy(headers: Sequence[Segment]) -> HierarchyAssignment:
    """Infer parents from dotted section numbering.

    ``d1.d2...dk`` goes under the latest header numbered ``d1...d(k-1)`` (or the
    longest numbered prefix seen so far). Top-level numbers go under the latest
    Title, if any. Titles are always roots. Unnumbered headers go under whatever
    header came just before them. This is a weak fallback, not a parser.
    """
    last_by_number: dict[tuple[int, ...], str] = {}
    last_title: str | None = None
    previous: str | None = None
    pairs: list[tuple[str, str | None]] = []
    for seg in headers:
        parent: str | None
        number = section_number(seg.text)
        if seg.segment_type is SegmentType.TITLE and number is None:
            parent = None
            last_title = seg.id
        elif number is None:
            parent = previous
        else:
            parent = last_title
            for cut in range(len(number) - 1, 0, -1):
                if number[:cut] in last_by_number:
                    parent = last_by_number[number[:cut]]
                    break
            last_by_number[number] = seg.id
        pairs.append((seg.id, parent))
        previous = seg.id
    return HierarchyAssignment.from_pairs(pairs, source="heuristic")


def _recompute_depths(tree: DocumentTree) -> None:
    tree.root.depth = 0
    for node in tree.preorder():
        for child in node.children:
            tree.nodes[child].depth = node.depth + 1


def build_header_tree(headers: Sequence[Segment], assignment: HierarchyAssignment) -> DocumentTree:
    """Arrange headers under FAKE_ROOT per ``assignment``.

    Headers the assignment does not mention are adopted by FAKE_ROOT, so no
    header is ever dropped. Sibling order follows reading order.
    """
    position = {seg.id: i for i, seg in enumerate(headers)}
    if ROOT_ID in position:
        raise AssignmentError(f"segment id {ROOT_ID!r} is reserved")
    validate_assignment(assignment, known_ids=position)
    for entry in assignment.entries:
        if entry.id not in position:
            raise AssignmentError(f"assignment id {entry.id!r} is not a header of this document")
    parents = assignment.parents
    nodes = {ROOT_ID: TreeNode(ROOT_ID, NodeKind.FAKE_ROOT, None, "")}
    for seg in headers:
        nodes[seg.id] = TreeNode(seg.id, NodeKind.HEADER, seg.segment_type, seg.text)
    for seg in headers:
        parent = parents.get(seg.id) or ROOT_ID
        nodes[seg.id].parent = parent
        nodes[parent].children.append(seg.id)
    for node in nodes.values():
        node.children.sort(key=position.__getitem__)
    tree = DocumentTree(nodes)
    _recompute_depths(tree)
    return tree


def attach_general_nodes(tree: DocumentTree, layout: AnnotatedLayout) -> DocumentTree:
    """Hang each non-header segment under the most recent header in reading order."""
    out = tree.copy()
    position = {seg.id: i for i, seg in enumerate(layout.segments)}
    current = out.root_id
    for seg in layout.segments:
        if seg.is_header:
            if seg.id not in out.nodes:
                raise AssignmentError(f"header {seg.id!r} missing from header tree")
            current = seg.id
            continue
        if seg.id in out.nodes:
            raise AssignmentError(f"segment id {seg.id!r} already present in tree")
        out.nodes[seg.id] = TreeNode(seg.id, NodeKind.GENERAL, seg.segment_type, seg.text, parent=current)
        out.nodes[current].children.append(seg.id)
    # FAKE_ROOT sorts first; unknown ids (headers not in the layout) keep their relative order at the end
    for node in out.nodes.values():
        node.children.sort(key=lambda c: position.get(c, len(position)))
    _recompute_depths(out)
    return out


def build_document_tree(layout: AnnotatedLayout, assignment: HierarchyAssignment) -> DocumentTree:
    return attach_general_nodes(build_header_tree(extract_header_list(layout), assignment), layout)


def tree_to_assignment(tree: DocumentTree) -> HierarchyAssignment:
    """Header-only parent assignment implied by a tree (FAKE_ROOT parents become null)."""
    pairs = []
    for node in tree.preorder():
        if node.kind is NodeKind.HEADER:
            pairs.append((node.id, None if node.parent == tree.root_id else node.parent))
    return HierarchyAssignment.from_pairs(pairs, source="tree")
