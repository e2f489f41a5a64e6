import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

CBO_HEADERS = [
    ("2", "CONGRESSIONAL BUDGET OFFICE COST ESTIMATE", 1, 74, 171),
    ("5", "SUMMARY", 1, 282, 71),
    ("23", "MAJOR PROVISIONS OF THE LEGISLATION", 1, 400, 71),
    ("37", "ESTIMATED COST TO THE FEDERAL GOVERNMENT", 2, 100, 71),
    ("39", "BASIS OF ESTIMATE", 2, 500, 71),
    ("44", "Use of the March 2016 Baseline", 3, 100, 71),
    ("46", "Methodology for Estimating Effects of ...", 3, 400, 71),
]

CBO_ASSIGNMENT = (
    '[{"id":"2","parent":null},{"id":"5","parent":"2"},{"id":"23","parent":"2"},'
    '{"id":"37","parent":"2"},{"id":"39","parent":"37"},{"id":"44","parent":"37"},{"id":"46","parent":"37"}]'
)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def cbo_layout():
    from hierchunk.layout import layout_from_dict

    segments = []
    for i, (sid, text, page, top, left) in enumerate(CBO_HEADERS):
        segments.append(
            {"id": sid, "segment_type": "Title" if i == 0 else "SectionHeader",
             "page_number": page, "top": top, "left": left, "text": text}
        )
        segments.append(
            {"id": f"t{sid}", "segment_type": "Text", "page_number": page, "top": top + 30, "left": left,
             "text": f"Body text under {text.lower()}."}
        )
    return layout_from_dict({"document_id": "cbo", "segments": segments})
