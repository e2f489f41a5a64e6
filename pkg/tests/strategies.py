"""Hypothesis strategies for layouts and chunks."""

from hypothesis import strategies as st

from hierchunk.chunker import Chunk
from hierchunk.layout import AnnotatedLayout, BoundingBox, Segment, SegmentType

words = st.text(alphabet="abcdefghij XY.,\n\t", min_size=0, max_size=40)
ids = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-_", min_size=1, max_size=6)


@st.composite
def segments(draw, min_size=0, max_size=12):
    seg_ids = draw(st.lists(ids, min_size=min_size, max_size=max_size, unique=True))
    out = []
    for sid in seg_ids:
        out.append(
            Segment(
                id=sid,
                segment_type=draw(st.sampled_from(list(SegmentType))),
                bbox=BoundingBox(
                    page_number=draw(st.integers(0, 3)),
                    top=draw(st.integers(0, 50)),
                    left=draw(st.integers(0, 50)),
                    width=draw(st.integers(0, 500)),
                    height=draw(st.integers(0, 500)),
                ),
                text=draw(words).rstrip("\r\n"),
            )
        )
    return out


@st.composite
def layouts(draw):
    from hierchunk.layout import reading_order_sort

    segs = draw(segments())
    doc_id = draw(ids)
    return AnnotatedLayout(doc_id, tuple(reading_order_sort(segs)))


@st.composite
def chunks(draw):
    doc = draw(ids)
    return Chunk(
        chunk_id=f"{doc}#{draw(st.integers(0, 999))}",
        document_id=doc,
        text=draw(st.text(max_size=60)),
        source_node_ids=tuple(draw(st.lists(ids, min_size=1, max_size=4))),
        split_index=draw(st.integers(0, 5)),
        token_count=draw(st.integers(0, 600)),
        oversize=draw(st.booleans()),
    )


def random_tree_layout(rng, max_segments=40, max_body_tokens=1500, max_heading_tokens=12):
    """Random layout plus a header assignment whose preorder follows reading order.

    Bodies mix short and very long texts so splitting is exercised; token
    separators vary (spaces, tabs, newlines) to test exact reconstruction.
    """
    from hierchunk.hierarchy import HierarchyAssignment

    seps = [" ", " ", " ", "  ", "\n", "\t", " \n "]

    def text(n_tokens):
        parts = []
        for i in range(n_tokens):
            parts.append(rng.choice(["alpha", "beta", "gamma", "delta", "x", "lorem", "ipsum", "42", "end."]))
            if i < n_tokens - 1:
                parts.append(rng.choice(seps))
        lead = rng.choice(["", "", " "]) if n_tokens else ""
        return lead + "".join(parts)

    segs, pairs, path = [], [], []
    for i in range(rng.randint(0, max_segments)):
        kind = rng.choice([SegmentType.SECTION_HEADER, SegmentType.TEXT, SegmentType.TEXT, SegmentType.TABLE, SegmentType.TITLE])
        box = BoundingBox(i // 20, (i % 20) * 40, 50)
        if kind.is_header:
            sid = f"h{i}"
            segs.append(Segment(sid, kind, box, text(rng.randint(1, max_heading_tokens))))
            path = path[: rng.randint(0, len(path))]
            pairs.append((sid, path[-1] if path else None))
            path.append(sid)
        else:
            n = rng.choice([0, rng.randint(1, 60), rng.randint(1, max_body_tokens)])
            segs.append(Segment(f"t{i}", kind, box, text(n)))
    return AnnotatedLayout("rand", tuple(segs)), HierarchyAssignment.from_pairs(pairs)
