"""Deterministic synthetic corpora used by the tests and the bundled benchmark.

``numbered_document`` builds a layout whose headers carry dotted section
numbers, together with the true parent of each header.

``report_corpus`` builds a small corpus of multi-section reports plus QA pairs.
Each question names a project and the organisation whose report describes it;
the project name lives in a section header, the organisation in the document
title, and the answer in a paragraph below them. Project names repeat across
reports, so a passage is only identifiable together with its headings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from hierchunk.hierarchy import HierarchyAssignment
from hierchunk.layout import AnnotatedLayout, BoundingBox, Segment, SegmentType
from hierchunk.metrics import Evidence, QaRecord

_FILLER_WORDS = (
    "the of and to in for on with as by at from this that these those which while during under over "
    "program review team schedule plan design phase result process analysis approach framework "
    "objective support quality standard update report resource effort partner stakeholder council "
    "community region district public service system network facility operation maintenance "
    "assessment monitoring evaluation strategy policy guideline procedure requirement outcome impact "
    "capacity performance delivery contract vendor procurement funding grant cost estimate timeline "
    "milestone progress risk issue mitigation measure indicator target baseline data record "
    "document meeting workshop consultation survey feedback response recommendation priority "
    "improvement upgrade expansion renewal replacement installation inspection testing training "
    "staff committee board office department agency unit group division center station site area "
    "annual quarterly monthly current previous future initial final overall general specific "
    "local national regional technical financial operational environmental social economic"
).split()

_ORGS = (
    "Northwind", "Blue Ridge", "Cedar Valley", "Ironwood", "Silver Lake", "Maple Grove", "Stonebridge",
    "Harborview", "Pine Hollow", "Redcliff", "Westmoor", "Eastgate", "Fairhaven", "Goldfield", "Highmark",
    "Larkspur", "Meadowbrook", "Oakridge", "Riverbend", "Summit Point", "Thornbury", "Willowdale",
    "Ashford", "Brookline", "Crestwood", "Dunmore", "Elmhurst", "Foxborough", "Glenview", "Kingsport",
)
_ORG_KINDS = ("Transit Authority", "Water District", "Housing Council", "Energy Cooperative", "Parks Board")
_TOPICS = ("Infrastructure", "Community Services", "Environment", "Technology", "Public Safety", "Facilities")
_PROJECTS = (
    "Harbor Bridge", "Solar Canopy", "River Trail", "Data Exchange", "Library Annex", "Flood Barrier",
    "Transit Hub", "Wetland Restoration", "Fiber Backbone", "Youth Center", "Water Treatment", "Bike Network",
    "Emergency Radio", "Tree Canopy", "Market Hall", "Clinic Expansion", "Rail Crossing", "Seawall Repair",
)
_FIRST = ("Alice", "Bruno", "Carmen", "Dmitri", "Elena", "Farid", "Grace", "Hiro", "Ingrid", "Jonas", "Keiko", "Luis")
_LAST = ("Abbott", "Baxter", "Castillo", "Dunn", "Eriksen", "Fischer", "Gallo", "Haines", "Ivanova", "Jensen")
_MONTHS = ("January", "March", "May", "July", "September", "November")


@dataclass(frozen=True)
class _Fact:
    question: str
    sentence: str
    answer: str


def _facts(rng: random.Random, project: str, org: str) -> list[_Fact]:
    budget = f"{rng.randint(2, 95)}.{rng.randint(1, 9)} million dollars"
    lead = f"{rng.choice(_FIRST)} {rng.choice(_LAST)}"
    when = f"{rng.choice(_MONTHS)} {rng.randint(2019, 2031)}"
    crews = f"{rng.randint(12, 480)} workers"
    return [
        _Fact(
            f"What is the allocated budget of the {project} project in the {org} report?",
            f"The allocated budget approved for this work is {budget}.",
            budget,
        ),
        _Fact(
            f"Who is the lead engineer of the {project} project described by {org}?",
            f"The lead engineer responsible for delivery is {lead}.",
            lead,
        ),
        _Fact(
            f"When is completion expected for the {project} project of {org}?",
            f"Completion of the works is expected in {when}.",
            when,
        ),
        _Fact(
            f"How many workers are assigned to the {project} project in the {org} report?",
            f"The assigned crew totals {crews} across all shifts.",
            crews,
        ),
    ]


def _filler(rng: random.Random, n_words: int) -> str:
    words = [rng.choice(_FILLER_WORDS) for _ in range(n_words)]
    sentences, i = [], 0
    while i < len(words):
        step = rng.randint(8, 16)
        chunk = words[i : i + step]
        sentences.append(chunk[0].capitalize() + " " + " ".join(chunk[1:]) + ".")
        i += step
    return " ".join(sentences)


class _PageCursor:
    def __init__(self, page_height: int = 1000):
        self.page, self.top, self.height = 0, 60, page_height

    def place(self, lines: int) -> BoundingBox:
        h = 18 * max(lines, 1)
        if self.top + h > self.height:
            self.page, self.top = self.page + 1, 60
        box = BoundingBox(self.page, self.top, 72, 468, h)
        self.top += h + 12
        return box


def report_corpus(
    n_documents: int = 30, questions_per_document: int = 2, seed: int = 13
) -> tuple[list[AnnotatedLayout], list[QaRecord]]:
    """Reports with a Title, numbered sections and numbered subsections (three header levels)."""
    rng = random.Random(seed)
    layouts: list[AnnotatedLayout] = []
    qa: list[QaRecord] = []
    for d in range(n_documents):
        org = f"{_ORGS[d % len(_ORGS)]} {_ORG_KINDS[d % len(_ORG_KINDS)]}"
        doc_id = f"report-{d:03d}"
        cursor = _PageCursor()
        segments: list[Segment] = []
        sid = 0

        def add(kind: SegmentType, text: str) -> str:
            nonlocal sid
            sid += 1
            seg = Segment(f"s{sid}", kind, cursor.place(len(text) // 80 + 1), text)
            segments.append(seg)
            return seg.id

        add(SegmentType.TITLE, f"{org} Annual Program Report")
        add(SegmentType.TEXT, _filler(rng, rng.randint(40, 70)))
        candidates: list[tuple[str, str, _Fact]] = []
        projects = rng.sample(_PROJECTS, 6)
        topics = rng.sample(_TOPICS, 3)
        for s, topic in enumerate(topics, start=1):
            add(SegmentType.SECTION_HEADER, f"{s} {topic}")
            add(SegmentType.TEXT, _filler(rng, rng.randint(50, 90)))
            for sub in range(1, 3):
                project = projects[(s - 1) * 2 + sub - 1]
                header_id = add(SegmentType.SECTION_HEADER, f"{s}.{sub} {project}")
                fact = rng.choice(_facts(rng, project, org))
                n_paras = rng.randint(3, 4)
                fact_para = rng.randrange(1, n_paras)
                for p in range(n_paras):
                    body = _filler(rng, rng.randint(70, 120))
                    if p == fact_para:
                        cut = body.find(". ", len(body) // 2)
                        body = body[: cut + 2] + fact.sentence + " " + body[cut + 2 :] if cut > 0 else body + " " + fact.sentence
                        candidates.append((header_id, add(SegmentType.TEXT, body), fact))
                    else:
                        add(SegmentType.TEXT, body)
                if rng.random() < 0.4:
                    add(SegmentType.TABLE, " | ".join(_filler(rng, 6).rstrip(".").split()))
                    add(SegmentType.CAPTION, f"Table: {_filler(rng, 6)}")
        layouts.append(AnnotatedLayout(doc_id, tuple(segments)))
        for n, (header_id, text_id, fact) in enumerate(rng.sample(candidates, questions_per_document)):
            qa.append(
                QaRecord(
                    query_id=f"{doc_id}-q{n}",
                    question=fact.question,
                    gold_answers=(fact.answer,),
                    gold_evidence=(Evidence(doc_id, segment_id=header_id), Evidence(doc_id, segment_id=text_id)),
                )
            )
    return layouts, qa


def numbered_document(
    rng: random.Random, doc_id: str = "doc", max_depth: int = 4, max_headers: int = 25, with_title: bool = True
) -> tuple[AnnotatedLayout, HierarchyAssignment]:
    """A layout with dotted-number headers and general text, plus the true header parents."""
    cursor = _PageCursor()
    segments: list[Segment] = []
    parents: list[tuple[str, str | None]] = []
    title_id: str | None = None

    def add(kind: SegmentType, text: str) -> str:
        seg = Segment(f"n{len(segments)}", kind, cursor.place(1), text)
        segments.append(seg)
        return seg.id

    if with_title:
        title_id = add(SegmentType.TITLE, _filler(rng, rng.randint(2, 6)).rstrip("."))
        parents.append((title_id, None))
    stack: list[tuple[tuple[int, ...], str]] = []  # open path of (number, header id)
    counters = [0] * (max_depth + 1)
    for _ in range(rng.randint(1, max_headers)):
        if not stack:
            depth = 1
        else:
            depth = rng.randint(1, min(len(stack) + 1, max_depth))
        counters[depth] += 1
        for deeper in range(depth + 1, max_depth + 1):
            counters[deeper] = 0
        number = tuple(counters[1 : depth + 1])
        stack = stack[: depth - 1]
        dotted = ".".join(map(str, number)) + ("." if depth == 1 and rng.random() < 0.3 else "")
        hid = add(SegmentType.SECTION_HEADER, f"{dotted} {_filler(rng, rng.randint(1, 4)).rstrip('.')}")
        parents.append((hid, stack[-1][1] if stack else title_id))
        stack.append((number, hid))
        for _ in range(rng.randint(0, 2)):
            add(rng.choice((SegmentType.TEXT, SegmentType.TEXT, SegmentType.TABLE, SegmentType.LIST)), _filler(rng, rng.randint(3, 30)))
    return AnnotatedLayout(doc_id, tuple(segments)), HierarchyAssignment.from_pairs(parents, source="gold")
