import gzip
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CBO_ASSIGNMENT
from hierchunk import store
from hierchunk.chunker import Chunk, ChunkConfig, dfs_chunk
from hierchunk.errors import FormatVersionError
from hierchunk.hierarchy import build_document_tree, parse_assignment
from hierchunk.retrieval import build_bm25_index, query
from strategies import chunks as chunk_strategy
from strategies import layouts, random_tree_layout


def three():
    return [Chunk(f"d#{i}", "d", f"text {i}", (f"s{i}",), split_index=i, token_count=2) for i in range(3)]


def test_chunks_round_trip(tmp_path):
    path = tmp_path / "c.jsonl"
    store.write_chunks(path, three())
    assert store.read_chunks(path) == three()
    first = json.loads(path.read_text().splitlines()[0])
    assert first["format_version"] == store.FORMAT_VERSION
    assert set(first) == {"chunk_id", "document_id", "text", "source_node_ids", "split_index", "token_count", "format_version"}


def test_empty_chunk_file(tmp_path):
    path = tmp_path / "c.jsonl"
    store.write_chunks(path, [])
    assert path.read_bytes() == b""
    assert store.read_chunks(path) == []


def test_newer_major_rejected(tmp_path):
    path = tmp_path / "c.jsonl"
    store.write_chunks(path, three())
    lines = path.read_text().splitlines()
    rec = json.loads(lines[1])
    rec["format_version"] = 2
    lines[1] = json.dumps(rec)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatVersionError, match="newer"):
        store.read_chunks(path)


def test_older_or_missing_version_accepted(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = three()[0].to_dict()
    path.write_text(json.dumps(rec) + "\n" + json.dumps({**rec, "chunk_id": "d#9", "format_version": "1.3"}) + "\n")
    assert len(store.read_chunks(path)) == 2


def test_invalid_jsonl_line_reports_position(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text('{"a": 1}\n{oops\n')
    with pytest.raises(ValueError, match=":2:"):
        store.read_jsonl(path)


def test_missing_file_is_oserror(tmp_path):
    with pytest.raises(OSError, match="cannot read"):
        store.read_chunks(tmp_path / "absent.jsonl")


@settings(max_examples=25, deadline=None)
@given(st.lists(chunk_strategy(), max_size=40))
def test_chunk_serialization_idempotent(tmp_path_factory, chunks):
    d = tmp_path_factory.mktemp("c")
    store.write_chunks(d / "a.jsonl", chunks)
    again = store.read_chunks(d / "a.jsonl")
    assert again == chunks
    store.write_chunks(d / "b.jsonl", again)
    assert (d / "a.jsonl").read_bytes() == (d / "b.jsonl").read_bytes()


def test_thousand_chunks_byte_stable(tmp_path):
    rng = random.Random(1)
    chunks = [
        Chunk(f"d{i % 7}#{i}", f"d{i % 7}", "".join(rng.choice("ab \n\t\"\\é😀") for _ in range(rng.randint(0, 40))),
              tuple(f"s{j}" for j in range(rng.randint(1, 3))), rng.randint(0, 3), rng.randint(0, 600), rng.random() < 0.1)
        for i in range(1000)
    ]
    store.write_chunks(tmp_path / "a.jsonl", chunks)
    store.write_chunks(tmp_path / "b.jsonl", store.read_chunks(tmp_path / "a.jsonl"))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


@settings(max_examples=25, deadline=None)
@given(layouts())
def test_layout_round_trip(tmp_path_factory, layout):
    path = tmp_path_factory.mktemp("l") / "x.json"
    store.write_layout(path, layout)
    assert store.read_layout(path) == layout


def test_tree_round_trip(tmp_path, cbo_layout):
    tree = build_document_tree(cbo_layout, parse_assignment(CBO_ASSIGNMENT))
    path = tmp_path / store.tree_filename("cbo")
    store.write_tree(path, tree, "cbo")
    doc_id, again = store.read_tree(path)
    assert doc_id == "cbo" and again.to_dict() == tree.to_dict()
    assert store.tree_to_json(again, "cbo") == path.read_bytes()


def test_tree_filename_is_safe():
    assert "/" not in store.tree_filename("a/b")
    assert store.tree_filename("a/b") != store.tree_filename("a_b")


def test_assignments_round_trip(tmp_path):
    a = parse_assignment(CBO_ASSIGNMENT, source="file")
    store.write_assignments(tmp_path / "a.json", {"cbo": a})
    assert store.read_assignments(tmp_path / "a.json")["cbo"].parents == a.parents


def test_index_round_trip(tmp_path):
    chunks = three()
    index = build_bm25_index(chunks)
    store.write_index(tmp_path / "index.bin", index)
    raw = json.loads(gzip.decompress((tmp_path / "index.bin").read_bytes()))
    assert raw["format"] == "hierchunk-bm25" and raw["format_version"] == 1
    again = store.read_index(tmp_path / "index.bin")
    assert query(again, "text 1", 3) == query(index, "text 1", 3)
    # deterministic bytes
    store.write_index(tmp_path / "again.bin", again)
    assert (tmp_path / "again.bin").read_bytes() == (tmp_path / "index.bin").read_bytes()


def test_index_wrong_format(tmp_path):
    (tmp_path / "i.bin").write_bytes(gzip.compress(b'{"format": "other"}'))
    with pytest.raises(FormatVersionError):
        store.read_index(tmp_path / "i.bin")


def test_results_and_report_round_trip(tmp_path):
    res = [query(build_bm25_index(three()), "text", 2, query_id="q")]
    store.write_results(tmp_path / "r.jsonl", res)
    assert store.read_results(tmp_path / "r.jsonl") == res
    report = {"retrieval": {"ndcg": {"1": 0.5}}}
    store.write_report(tmp_path / "rep.json", report)
    assert store.read_report(tmp_path / "rep.json") == report


def test_digest_permutation_and_avalanche(tmp_path):
    paths = []
    for i in range(5):
        p = tmp_path / f"f{i}.json"
        p.write_bytes(f"document {i} body".encode())
        paths.append(p)
    d = store.corpus_digest(paths)
    assert store.corpus_digest(list(reversed(paths))) == d
    for p in paths:
        original = p.read_bytes()
        for pos in range(len(original)):
            edited = bytearray(original)
            edited[pos] ^= 0x01
            p.write_bytes(bytes(edited))
            assert store.corpus_digest(paths) != d
        p.write_bytes(original)
    assert store.corpus_digest(paths) == d


def test_manifest_round_trip(tmp_path):
    (tmp_path / "chunks.jsonl").write_text("")
    run = store.RunManifest("r1", "2026-01-01T00:00:00+00:00", "2026-01-01T00:01:00+00:00",
                            {"chunk": {"max_len": 550}}, "ab" * 32, {"chunks": "chunks.jsonl"},
                            fallback_count=2, documents=3, failed_documents=["x"])
    store.write_manifest(tmp_path / "manifest.json", run)
    assert store.read_manifest(tmp_path / "manifest.json") == run


def test_manifest_rejects_dangling_output(tmp_path):
    run = store.RunManifest("r1", "", "", {}, "", {"chunks": "missing.jsonl"})
    with pytest.raises(FileNotFoundError):
        store.write_manifest(tmp_path / "manifest.json", run)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    store.atomic_write(tmp_path / "sub" / "x.txt", b"one")
    store.atomic_write(tmp_path / "sub" / "x.txt", b"two")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["x.txt"]
    assert (tmp_path / "sub" / "x.txt").read_bytes() == b"two"


def test_same_tree_same_chunk_bytes(tmp_path):
    layout, assignment = random_tree_layout(random.Random(9))
    for name in ("a", "b"):
        tree = build_document_tree(layout, assignment)
        store.write_chunks(tmp_path / f"{name}.jsonl", dfs_chunk(tree, ChunkConfig(max_len=80), "rand"))
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
