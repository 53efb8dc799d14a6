"""Commonness-based entity linking with a document-level person coreference rule."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import MentionExample
from .knowledge_base import KnowledgeBase, normalize_surface


@dataclass(frozen=True)
class LinkResult:
    entity_id: str | None
    confidence: float
    resolved_surface: str

    @property
    def is_nil(self) -> bool:
        return self.entity_id is None

    def to_record(self) -> dict:
        return {"entity_id": self.entity_id, "confidence": self.confidence,
                "resolved_surface": self.resolved_surface}


def nil_result(surface: str = "") -> LinkResult:
    return LinkResult(None, 0.0, surface)


def link_mention(kb: KnowledgeBase, surface: str) -> LinkResult:
    """Link to the entity with the greatest commonness.

    Ties go to the lexicographically smallest entity id; unseen surfaces
    link to NIL.
    """
    s = normalize_surface(surface)
    row = kb.anchors.counts.get(s)
    if not row:
        return nil_result(surface)
    best = min(row, key=lambda e: (-row[e], e))
    return LinkResult(best, kb.anchors.commonness(s, best), surface)


def _contains_run(longer: Sequence[str], shorter: Sequence[str]) -> bool:
    n, m = len(longer), len(shorter)
    return any(tuple(longer[i:i + m]) == tuple(shorter) for i in range(n - m + 1))


def resolve_person_coreference(mention: MentionExample,
                               document_mentions: Sequence[MentionExample],
                               kb: KnowledgeBase, links: Sequence[LinkResult] | None = None) -> str:
    """Map a short person mention ("Matt") to a longer one in the same document ("Matt Damon").

    A longer mention qualifies when the short surface is a contiguous token
    run inside it and the longer surface links to a person entity. The most
    confidently linked candidate wins, then the earliest in the document.
    ``links`` may carry precomputed ``link_mention`` results for
    ``document_mentions``.
    """
    short = normalize_surface(mention.surface).split()
    best = None
    for pos, other in enumerate(document_mentions):
        long_tokens = normalize_surface(other.surface).split()
        if len(long_tokens) <= len(short) or not _contains_run(long_tokens, short):
            continue
        link = links[pos] if links is not None else link_mention(kb, other.surface)
        entity = None if link.is_nil else kb.entities.get(link.entity_id)
        if entity is None or not entity.is_person:
            continue
        key = (-link.confidence, pos)
        if best is None or key < best[0]:
            best = (key, other.surface)
    return mention.surface if best is None else best[1]


def link_in_document(kb: KnowledgeBase, document_mentions: Sequence[MentionExample]) -> list[LinkResult]:
    direct = [link_mention(kb, m.surface) for m in document_mentions]
    results = []
    for m, own in zip(document_mentions, direct):
        surface = resolve_person_coreference(m, document_mentions, kb, direct)
        results.append(own if surface == m.surface else link_mention(kb, surface))
    return results


def link_examples(kb: KnowledgeBase, examples: Sequence[MentionExample]) -> list[LinkResult]:
    """Link a mixed list of mentions, grouping by ``doc_id`` for coreference."""
    by_doc: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        by_doc.setdefault(ex.doc_id, []).append(i)
    out: list[LinkResult | None] = [None] * len(examples)
    for idx in by_doc.values():
        for i, link in zip(idx, link_in_document(kb, [examples[i] for i in idx])):
            out[i] = link
    return out
