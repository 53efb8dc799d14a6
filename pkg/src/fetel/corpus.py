"""Mention datasets, weak labeling from anchor links, and word embeddings."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import (DimensionMismatch, InsufficientData, IoFailure, SchemaViolation,
                     UnknownEntity, UnknownType)
from .knowledge_base import KnowledgeBase
from .type_system import KbTypeMapping, TypePath, TypeVocabulary, expand_with_ancestors, parse_type_path

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MentionExample:
    doc_id: str
    tokens: tuple[str, ...]
    span: tuple[int, int]
    labels: frozenset[TypePath] = frozenset()
    anchor_target: str | None = None

    def __post_init__(self):
        start, end = self.span
        if not (0 <= start < end <= len(self.tokens)):
            raise SchemaViolation(f"span {list(self.span)} invalid for {len(self.tokens)} tokens")

    @property
    def surface(self) -> str:
        return " ".join(self.tokens[self.span[0]:self.span[1]])

    @property
    def mention_length(self) -> int:
        return self.span[1] - self.span[0]

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "tokens": list(self.tokens),
            "span": list(self.span),
            "labels": sorted(str(t) for t in self.labels),
            "anchor_target": self.anchor_target,
        }


def example_from_record(rec, vocab: TypeVocabulary | None, index: int | None = None,
                        require_labels: bool = True) -> MentionExample:
    if not isinstance(rec, dict):
        raise SchemaViolation("record is not a JSON object", index)
    doc_id = rec.get("doc_id")
    tokens = rec.get("tokens")
    span = rec.get("span")
    if not isinstance(doc_id, str):
        raise SchemaViolation("'doc_id' must be a string", index)
    if not isinstance(tokens, list) or not tokens or not all(isinstance(t, str) and t for t in tokens):
        raise SchemaViolation("'tokens' must be a nonempty list of nonempty strings", index)
    if (not isinstance(span, list) or len(span) != 2
            or not all(isinstance(x, int) and not isinstance(x, bool) for x in span)):
        raise SchemaViolation("'span' must be [start, end] integers", index)
    if not 0 <= span[0] < span[1] <= len(tokens):
        raise SchemaViolation(f"span {span} out of range for {len(tokens)} tokens", index)
    raw_labels = rec.get("labels")
    if raw_labels is None:
        raw_labels = []
    if not isinstance(raw_labels, list):
        raise SchemaViolation("'labels' must be a list", index)
    if require_labels and not raw_labels:
        raise SchemaViolation("record has no labels", index)
    try:
        labels = expand_with_ancestors((parse_type_path(t) for t in raw_labels), vocab)
    except UnknownType as exc:
        raise UnknownType(f"record {index}: {exc}") from None
    target = rec.get("anchor_target")
    if target is not None and not isinstance(target, str):
        raise SchemaViolation("'anchor_target' must be a string or null", index)
    return MentionExample(doc_id, tuple(tokens), (span[0], span[1]), frozenset(labels), target)


def _read_jsonl(path) -> Iterator[tuple[int, object]]:
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with f:
        for i, line in enumerate(f):
            if not line.strip():
                continue
            try:
                yield i, json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaViolation(f"invalid JSON in {path}: {exc}", i) from exc


def load_dataset(path, vocab: TypeVocabulary | None, require_labels: bool = True) -> list[MentionExample]:
    return [example_from_record(rec, vocab, i, require_labels) for i, rec in _read_jsonl(path)]


def read_records(path) -> list[dict]:
    return [rec for _, rec in _read_jsonl(path)]


def save_dataset(examples: Iterable[MentionExample], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(json.dumps(ex.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


@dataclass(frozen=True)
class AnchorDocument:
    """One sentence with its anchor spans, ``[(start, end, entity_id), ...]``."""
    doc_id: str
    tokens: tuple[str, ...]
    anchors: tuple[tuple[int, int, str], ...] = ()


def read_anchor_documents(path) -> Iterator[AnchorDocument]:
    """Read ``{"doc_id", "tokens", "anchors": [{"span": [s, e], "entity_id": ...}]}`` lines."""
    for i, rec in _read_jsonl(path):
        if not isinstance(rec, dict) or not isinstance(rec.get("doc_id"), str):
            raise SchemaViolation("anchor document needs a string 'doc_id'", i)
        tokens = rec.get("tokens")
        if not isinstance(tokens, list) or not all(isinstance(t, str) and t for t in tokens):
            raise SchemaViolation("'tokens' must be a list of nonempty strings", i)
        anchors = []
        for a in rec.get("anchors", []):
            try:
                (s, e), eid = a["span"], a["entity_id"]
            except (KeyError, TypeError, ValueError):
                raise SchemaViolation("anchor needs 'span' [s, e] and 'entity_id'", i) from None
            if not isinstance(s, int) or not isinstance(e, int) or not 0 <= s < e <= len(tokens):
                raise SchemaViolation(f"anchor span {a['span']} out of range", i)
            if not isinstance(eid, str) or not eid:
                raise SchemaViolation("anchor 'entity_id' must be a nonempty string", i)
            anchors.append((s, e, eid))
        yield AnchorDocument(rec["doc_id"], tuple(tokens), tuple(anchors))


@dataclass
class WeakLabelReport:
    anchors: int = 0
    examples: int = 0
    unknown_entity: int = 0
    empty_labels: int = 0


def generate_weak_labels(anchor_docs: Iterable[AnchorDocument], kb: KnowledgeBase,
                         mapping: KbTypeMapping, vocab: TypeVocabulary,
                         report: WeakLabelReport | None = None) -> list[MentionExample]:
    """Turn every anchor into a mention labeled with its target's mapped types.

    Anchors to unknown entities, or to entities whose types map to nothing
    in the tag set, are dropped and tallied in ``report``.
    """
    report = report if report is not None else WeakLabelReport()
    out = []
    for doc in anchor_docs:
        for start, end, eid in doc.anchors:
            report.anchors += 1
            try:
                kb_types = kb.entity_types(eid)
            except UnknownEntity:
                report.unknown_entity += 1
                continue
            labels = vocab.expand_with_ancestors(mapping.map(kb_types))
            if not labels:
                report.empty_labels += 1
                continue
            out.append(MentionExample(doc.doc_id, doc.tokens, (start, end), frozenset(labels), eid))
            report.examples += 1
    return out


def split_dev(examples, dev_size: int, seed: int = 0):
    """Randomly hold out ``dev_size`` examples; returns ``(train, dev)``.

    Both parts keep the input order of their members.
    """
    examples = list(examples)
    if dev_size < 0 or dev_size > len(examples):
        raise InsufficientData(f"cannot take {dev_size} dev examples from {len(examples)}")
    rng = np.random.default_rng(seed)
    dev_idx = set(rng.permutation(len(examples))[:dev_size].tolist())
    train = [ex for i, ex in enumerate(examples) if i not in dev_idx]
    dev = [ex for i, ex in enumerate(examples) if i in dev_idx]
    return train, dev


@dataclass
class EmbeddingTable:
    dimension: int
    words: list[str]
    vectors: np.ndarray
    unk_vector: np.ndarray
    mention_token_vector: np.ndarray
    index: dict[str, int] = field(init=False, repr=False)
    lower_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32).reshape(len(self.words), self.dimension)
        self.index = {w: i for i, w in enumerate(self.words)}
        self.lower_index = {}
        for i, w in enumerate(self.words):
            self.lower_index.setdefault(w.lower(), i)

    @property
    def vocabulary(self) -> dict[str, np.ndarray]:
        return {w: self.vectors[i] for w, i in self.index.items()}

    def __len__(self):
        return len(self.words)

    def lookup_index(self, word: str) -> int | None:
        """Exact match, then lowercased match, else ``None`` (unknown)."""
        i = self.index.get(word)
        if i is None:
            i = self.lower_index.get(word.lower())
        return i

    def lookup(self, word: str) -> np.ndarray:
        i = self.lookup_index(word)
        return self.unk_vector if i is None else self.vectors[i]

    @classmethod
    def from_vectors(cls, words, vectors, seed: int = 0) -> EmbeddingTable:
        vectors = np.asarray(vectors, dtype=np.float32)
        dim = vectors.shape[1]
        rng = np.random.default_rng(seed)
        unk = rng.uniform(-0.1, 0.1, dim).astype(np.float32)
        mention = rng.uniform(-0.1, 0.1, dim).astype(np.float32)
        return cls(dim, list(words), vectors, unk, mention)


def load_embeddings(path, seed: int = 0) -> EmbeddingTable:
    """Parse a GloVe-style text file (``word v1 ... vd`` per line)."""
    words, rows = [], []
    dim = None
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read embeddings {path}: {exc}") from exc
    with f:
        for lineno, line in enumerate(f, 1):
            parts = line.rstrip().split(" ")
            if len(parts) < 2 or not parts[0]:
                if not line.strip():
                    continue
                raise DimensionMismatch("expected a word followed by its values", lineno)
            if dim is None:
                dim = len(parts) - 1
            elif len(parts) - 1 != dim:
                raise DimensionMismatch(f"{len(parts) - 1} values, expected {dim}", lineno)
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise DimensionMismatch(f"non-numeric value ({exc})", lineno) from None
            words.append(parts[0])
    if dim is None:
        raise IoFailure(f"embedding file {path} is empty")
    return EmbeddingTable.from_vectors(words, np.array(rows, dtype=np.float32), seed)


def save_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for w, vec in zip(table.words, table.vectors):
            f.write(w + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def label_counts(examples: Iterable[MentionExample]) -> Counter:
    return Counter(t for ex in examples for t in ex.labels)
