"""Entity records and anchor-link statistics backing the commonness prior."""

from __future__ import annotations

import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptySurface, FormatVersionMismatch, IoFailure, SchemaViolation, UnknownEntity
from .type_system import KbTypeMapping, TypePath

logger = logging.getLogger(__name__)

SNAPSHOT_MAGIC = "FETEL-KB"
SNAPSHOT_VERSION = 1
PERSON = TypePath(("person",))


def normalize_surface(surface: str) -> str:
    return " ".join(surface.split()).lower()


@dataclass(frozen=True)
class EntityRecord:
    entity_id: str
    title: str = ""
    kb_types: tuple[str, ...] = ()
    is_person: bool = False


@dataclass
class IngestReport:
    pairs: int = 0
    skipped_empty: int = 0


class AnchorStatistics:
    """Surface string -> entity co-occurrence counts."""

    def __init__(self):
        self.counts: dict[str, Counter] = defaultdict(Counter)
        self.totals: Counter = Counter()

    def add(self, surface: str, entity_id: str, count: int = 1) -> None:
        s = normalize_surface(surface)
        if not s:
            raise EmptySurface(f"surface {surface!r} is blank after normalization")
        if not entity_id:
            raise SchemaViolation("anchor pair with empty entity id")
        if count <= 0:
            raise SchemaViolation(f"non-positive count {count} for ({s!r}, {entity_id!r})")
        self.counts[s][entity_id] += count
        self.totals[s] += count

    def merge(self, other: AnchorStatistics) -> AnchorStatistics:
        out = AnchorStatistics()
        for stats in (self, other):
            for s, row in stats.counts.items():
                for e, c in row.items():
                    out.counts[s][e] += c
                    out.totals[s] += c
        return out

    def candidates(self, surface: str) -> dict[str, int]:
        return dict(self.counts.get(normalize_surface(surface), {}))

    def commonness(self, surface: str, entity_id: str) -> float:
        s = normalize_surface(surface)
        total = self.totals.get(s, 0)
        if not total:
            return 0.0
        return self.counts[s].get(entity_id, 0) / total

    def surfaces(self) -> list[str]:
        return sorted(self.counts)

    def __len__(self):
        return len(self.counts)

    def __eq__(self, other):
        if not isinstance(other, AnchorStatistics):
            return NotImplemented
        return ({s: dict(r) for s, r in self.counts.items()} ==
                {s: dict(r) for s, r in other.counts.items()})


def ingest_anchors(pairs: Iterable[tuple[str, str]],
                   report: IngestReport | None = None) -> AnchorStatistics:
    """Count (surface, entity) anchor pairs.

    Blank surfaces are skipped and tallied in ``report``.
    """
    stats = AnchorStatistics()
    report = report if report is not None else IngestReport()
    for surface, entity_id in pairs:
        report.pairs += 1
        try:
            stats.add(surface, entity_id)
        except EmptySurface:
            report.skipped_empty += 1
    if report.skipped_empty:
        logger.info("skipped %d anchors with blank surfaces", report.skipped_empty)
    return stats


def commonness(stats: AnchorStatistics, surface: str, entity_id: str) -> float:
    return stats.commonness(surface, entity_id)


@dataclass
class KnowledgeBase:
    entities: dict[str, EntityRecord] = field(default_factory=dict)
    anchors: AnchorStatistics = field(default_factory=AnchorStatistics)

    def add_entity(self, record: EntityRecord) -> None:
        if record.entity_id in self.entities:
            raise SchemaViolation(f"duplicate entity id {record.entity_id!r}")
        self.entities[record.entity_id] = record

    def get(self, entity_id: str) -> EntityRecord:
        try:
            return self.entities[entity_id]
        except KeyError:
            raise UnknownEntity(f"entity {entity_id!r} is not in the knowledge base") from None

    def entity_types(self, entity_id: str) -> list[str]:
        return list(self.get(entity_id).kb_types)

    def __contains__(self, entity_id):
        return entity_id in self.entities

    def commonness(self, surface: str, entity_id: str) -> float:
        return self.anchors.commonness(surface, entity_id)

    @classmethod
    def build(cls, entities: Iterable[dict | EntityRecord], anchors: Iterable[tuple[str, str]],
              mapping: KbTypeMapping | None = None,
              report: IngestReport | None = None) -> KnowledgeBase:
        """Assemble a KB; ``is_person`` is derived from ``mapping`` when given."""
        kb = cls()
        for rec in entities:
            if isinstance(rec, dict):
                rec = EntityRecord(rec["id"], rec.get("title", ""), tuple(rec.get("types", [])))
            if mapping is not None:
                rec = EntityRecord(rec.entity_id, rec.title, rec.kb_types,
                                   PERSON in mapping.map(rec.kb_types))
            kb.add_entity(rec)
        kb.anchors = ingest_anchors(anchors, report)
        return kb


def entity_types(kb: KnowledgeBase, entity_id: str) -> list[str]:
    return kb.entity_types(entity_id)


def read_entities_jsonl(path) -> Iterator[dict]:
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read entity file {path}: {exc}") from exc
    with f:
        for i, line in enumerate(f):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"invalid JSON in {path}: {exc}", i) from exc
            if not isinstance(rec, dict) or not isinstance(rec.get("id"), str) or not rec["id"]:
                raise SchemaViolation(f"entity record in {path} needs a non-empty string 'id'", i)
            types = rec.get("types", [])
            if not isinstance(types, list) or not all(isinstance(t, str) for t in types):
                raise SchemaViolation(f"'types' in {path} must be a list of strings", i)
            yield rec


def read_anchor_tsv(path) -> Iterator[tuple[str, str]]:
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read anchor file {path}: {exc}") from exc
    with f:
        for i, line in enumerate(f):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise SchemaViolation(f"{path}: expected 'surface<TAB>entity_id'", i)
            yield parts[0], parts[1]


def save_snapshot(kb: KnowledgeBase, path) -> None:
    """Write a line-delimited snapshot.

    Layout: a magic/version header line, one JSON line per entity, one per
    surface, then an end marker carrying both counts so truncation is
    detected on load.
    """
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{SNAPSHOT_MAGIC}\t{SNAPSHOT_VERSION}\n")
            for eid in sorted(kb.entities):
                e = kb.entities[eid]
                f.write(json.dumps({"e": e.entity_id, "title": e.title, "types": list(e.kb_types),
                                    "person": e.is_person}, ensure_ascii=False) + "\n")
            for s in kb.anchors.surfaces():
                f.write(json.dumps({"s": s, "c": dict(sorted(kb.anchors.counts[s].items()))},
                                   ensure_ascii=False) + "\n")
            f.write(json.dumps({"end": [len(kb.entities), len(kb.anchors)]}) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write snapshot {path}: {exc}") from exc


def load_snapshot(path) -> KnowledgeBase:
    try:
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read snapshot {path}: {exc}") from exc
    if not lines or lines[0] != f"{SNAPSHOT_MAGIC}\t{SNAPSHOT_VERSION}":
        found = lines[0][:40] if lines else "<empty file>"
        raise FormatVersionMismatch(
            f"{path}: expected header {SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION}, found {found!r}")
    kb = KnowledgeBase()
    ended = False
    for lineno, line in enumerate(lines[1:], 2):
        if ended:
            raise IoFailure(f"{path}:{lineno}: data after end marker")
        try:
            rec = json.loads(line)
            if "e" in rec:
                kb.add_entity(EntityRecord(rec["e"], rec["title"], tuple(rec["types"]), bool(rec["person"])))
            elif "s" in rec:
                for e, c in rec["c"].items():
                    kb.anchors.counts[rec["s"]][e] = int(c)
                    kb.anchors.totals[rec["s"]] += int(c)
            elif "end" in rec:
                if rec["end"] != [len(kb.entities), len(kb.anchors)]:
                    raise IoFailure(f"{path}: end marker counts {rec['end']} do not match contents")
                ended = True
            else:
                raise IoFailure(f"{path}:{lineno}: unrecognized record")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise IoFailure(f"{path}:{lineno}: corrupt snapshot record ({exc})") from exc
    if not ended:
        raise IoFailure(f"{path}: snapshot is truncated (no end marker)")
    return kb
