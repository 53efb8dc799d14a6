"""Hierarchical target tag set, KB type mapping and type-set encodings."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import IoFailure, MalformedTypePath, UnknownType

_WS = re.compile(r"\s")


@dataclass(frozen=True, order=True)
class TypePath:
    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments:
            raise MalformedTypePath("type path needs at least one segment")
        for seg in self.segments:
            if not seg or "/" in seg or _WS.search(seg):
                raise MalformedTypePath(f"bad segment {seg!r} in {self.segments!r}")

    @property
    def depth(self) -> int:
        return len(self.segments)

    @property
    def parent(self) -> TypePath | None:
        if self.depth == 1:
            return None
        return TypePath(self.segments[:-1])

    def ancestors(self) -> list[TypePath]:
        """Strict prefixes, shallowest first."""
        return [TypePath(self.segments[:j]) for j in range(1, self.depth)]

    def __str__(self) -> str:
        return "/" + "/".join(self.segments)

    def __repr__(self) -> str:
        return f"TypePath({str(self)!r})"


def parse_type_path(raw: str) -> TypePath:
    """Parse ``"/person/politician"`` into a :class:`TypePath`.

    Input is lowercased and a single trailing slash is dropped.
    """
    if not isinstance(raw, str) or not raw:
        raise MalformedTypePath(f"empty type path: {raw!r}")
    if not raw.startswith("/"):
        raise MalformedTypePath(f"type path must start with '/': {raw!r}")
    body = raw[1:]
    if body.endswith("/"):
        body = body[:-1]
    if not body:
        raise MalformedTypePath(f"type path has no segments: {raw!r}")
    return TypePath(tuple(body.lower().split("/")))


def _as_path(t) -> TypePath:
    return t if isinstance(t, TypePath) else parse_type_path(t)


class TypeVocabulary:
    """The ordered tag set T.

    Types keep the order they were given in; that order defines the index
    used by score vectors, one-hot encodings and type embedding rows.
    """

    def __init__(self, types: Iterable[TypePath | str], validate: bool = True):
        self.types: list[TypePath] = [_as_path(t) for t in types]
        self.index: dict[TypePath, int] = {}
        for i, t in enumerate(self.types):
            if t in self.index:
                raise MalformedTypePath(f"duplicate type {t}")
            self.index[t] = i
        if validate:
            for t in self.types:
                if t.parent is not None and t.parent not in self.index:
                    raise UnknownType(f"{t} is in the tag set but its parent {t.parent} is not")
        self.person_fine_types: frozenset[TypePath] = frozenset(
            t for t in self.types if t.segments[0] == "person" and t.depth >= 2
        )

    def __len__(self):
        return len(self.types)

    def __iter__(self):
        return iter(self.types)

    def __contains__(self, t):
        return _as_path(t) in self.index

    def __eq__(self, other):
        return isinstance(other, TypeVocabulary) and self.types == other.types

    @property
    def k(self) -> int:
        return len(self.types)

    def index_of(self, t) -> int:
        t = _as_path(t)
        try:
            return self.index[t]
        except KeyError:
            raise UnknownType(f"{t} is not in the tag set") from None

    def check(self, labels) -> set[TypePath]:
        out = set()
        for t in labels:
            t = _as_path(t)
            if t not in self.index:
                raise UnknownType(f"{t} is not in the tag set")
            out.add(t)
        return out

    def expand_with_ancestors(self, labels) -> set[TypePath]:
        closed = self.check(labels)
        for t in list(closed):
            closed.update(t.ancestors())
        return closed

    def one_hot(self, labels) -> np.ndarray:
        vec = np.zeros(self.k, dtype=np.float32)
        for t in labels:
            vec[self.index_of(t)] = 1.0
        return vec

    def decode(self, bits) -> set[TypePath]:
        return {self.types[i] for i in np.flatnonzero(np.asarray(bits) > 0.5)}

    def penalty_weight(self, t, lambda_p: float) -> float:
        t = _as_path(t)
        if t not in self.index:
            raise UnknownType(f"{t} is not in the tag set")
        return float(lambda_p) if t in self.person_fine_types else 1.0

    def penalty_vector(self, lambda_p: float) -> np.ndarray:
        """lambda(t) for every type, in index order."""
        return np.array([self.penalty_weight(t, lambda_p) for t in self.types])

    @classmethod
    def load(cls, path) -> TypeVocabulary:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot read type file {path}: {exc}") from exc
        types = []
        for line in text.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                types.append(parse_type_path(line))
        return cls(types)

    def save(self, path) -> None:
        Path(path).write_text("".join(f"{t}\n" for t in self.types), encoding="utf-8")


def expand_with_ancestors(labels, vocab: TypeVocabulary | None = None) -> set[TypePath]:
    """Close ``labels`` under prefixes.

    With a vocabulary every label must belong to it; without one the
    closure is purely structural.
    """
    if vocab is not None:
        return vocab.expand_with_ancestors(labels)
    closed = {_as_path(t) for t in labels}
    for t in list(closed):
        closed.update(t.ancestors())
    return closed


def one_hot(labels, vocab: TypeVocabulary) -> np.ndarray:
    return vocab.one_hot(labels)


def penalty_weight(t, lambda_p: float, vocab: TypeVocabulary) -> float:
    return vocab.penalty_weight(t, lambda_p)


class KbTypeMapping:
    """KB type identifier -> set of target types.

    Lookups of unmapped KB types return the empty set.
    """

    def __init__(self, entries: Mapping[str, Iterable[TypePath | str]] | None = None,
                 vocab: TypeVocabulary | None = None):
        self.entries: dict[str, frozenset[TypePath]] = {}
        for kb_type, targets in (entries or {}).items():
            self.entries[kb_type] = frozenset(_as_path(t) for t in targets)
        if vocab is not None:
            self.validate(vocab)

    def validate(self, vocab: TypeVocabulary) -> None:
        for kb_type, targets in self.entries.items():
            for t in targets:
                if t not in vocab:
                    raise UnknownType(f"mapping for {kb_type!r} targets {t}, which is not in the tag set")

    def __getitem__(self, kb_type: str) -> frozenset[TypePath]:
        return self.entries.get(kb_type, frozenset())

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, KbTypeMapping) and self.entries == other.entries

    def map(self, kb_types: Iterable[str]) -> set[TypePath]:
        out: set[TypePath] = set()
        for kb_type in kb_types:
            out.update(self[kb_type])
        return expand_with_ancestors(out)

    @classmethod
    def load(cls, path, vocab: TypeVocabulary | None = None) -> KbTypeMapping:
        entries: dict[str, set[TypePath]] = {}
        try:
            lines = Path(path).read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IoFailure(f"cannot read mapping file {path}: {exc}") from exc
        for lineno, line in enumerate(lines, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or not parts[0].strip():
                raise MalformedTypePath(f"{path}:{lineno}: expected 'kb_type<TAB>/target/path'")
            entries.setdefault(parts[0].strip(), set()).add(parse_type_path(parts[1].strip()))
        return cls(entries, vocab)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for kb_type in sorted(self.entries):
                for t in sorted(self.entries[kb_type]):
                    f.write(f"{kb_type}\t{t}\n")


def map_kb_types(kb_types: Iterable[str], mapping: KbTypeMapping) -> set[TypePath]:
    return mapping.map(kb_types)
