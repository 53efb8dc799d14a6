"""Small generated worlds (tag set, KB, anchors, embeddings, mentions) for
tests, demos and desk-scale training runs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import AnchorDocument, EmbeddingTable, MentionExample, save_dataset, save_embeddings
from .knowledge_base import KnowledgeBase
from .type_system import KbTypeMapping, TypeVocabulary

PERSON_TREE = [
    "/person", "/person/politician", "/person/actor", "/person/author", "/person/athlete",
    "/location", "/location/city", "/location/country",
    "/organization", "/organization/company", "/organization/sports_team",
    "/event",
]

NON_PERSON_TREE = [
    "/location", "/location/city", "/location/country", "/location/body_of_water",
    "/organization", "/organization/company", "/organization/sports_team", "/organization/government",
    "/product", "/product/software",
    "/event", "/event/election",
]


@dataclass
class SyntheticWorld:
    vocab: TypeVocabulary
    mapping: KbTypeMapping
    kb: KnowledgeBase
    embeddings: EmbeddingTable
    entities: list[dict]
    anchor_pairs: list[tuple[str, str]]
    examples: list[MentionExample]
    entity_split: dict[str, str] = field(default_factory=dict)

    def anchor_documents(self) -> list[AnchorDocument]:
        docs: dict[str, list[MentionExample]] = {}
        for ex in self.examples:
            docs.setdefault(ex.doc_id, []).append(ex)
        out = []
        for doc_id, exs in docs.items():
            for ex in exs:
                out.append(AnchorDocument(doc_id, ex.tokens, ((*ex.span, ex.anchor_target),)))
        return out

    def split_by_entity(self) -> tuple[list[MentionExample], list[MentionExample]]:
        train = [ex for ex in self.examples if self.entity_split.get(ex.anchor_target) != "dev"]
        dev = [ex for ex in self.examples if self.entity_split.get(ex.anchor_target) == "dev"]
        return train, dev

    def write(self, directory) -> dict[str, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        paths = {name: d / fname for name, fname in [
            ("types", "types.txt"), ("mapping", "mapping.tsv"), ("entities", "entities.jsonl"),
            ("anchors", "anchors.tsv"), ("anchor_docs", "anchor_docs.jsonl"),
            ("embeddings", "embeddings.txt"), ("mentions", "mentions.jsonl")]}
        self.vocab.save(paths["types"])
        self.mapping.save(paths["mapping"])
        with open(paths["entities"], "w") as f:
            for e in self.entities:
                f.write(json.dumps(e) + "\n")
        with open(paths["anchors"], "w") as f:
            for s, e in self.anchor_pairs:
                f.write(f"{s}\t{e}\n")
        with open(paths["anchor_docs"], "w") as f:
            for doc in self.anchor_documents():
                f.write(json.dumps({"doc_id": doc.doc_id, "tokens": list(doc.tokens),
                                    "anchors": [{"span": [s, e], "entity_id": eid}
                                                for s, e, eid in doc.anchors]}) + "\n")
        save_embeddings(self.embeddings, paths["embeddings"])
        save_dataset(self.examples, paths["mentions"])
        return paths


def make_world(n_mentions: int = 200, vocab_size: int = 500, tree=PERSON_TREE, n_entities: int = 80,
               dim: int = 300, sentence_length: tuple[int, int] = (8, 16), dev_entity_fraction: float = 0.0,
               shared_names: bool = False, oov_names: bool = False, context_pool: int | None = None,
               seed: int = 0) -> SyntheticWorld:
    """Generate a consistent toy world.

    Every entity gets one or two unique surface words and one or two leaf
    types (persons may hold two fine person types). Context words are drawn
    uniformly, so they carry no label information. Each mention's weak labels
    are the closure of its entity's mapped KB types, and the anchor counts
    make the mention's own entity the commonness argmax.

    With ``shared_names`` every entity is named by a unique pair of words
    drawn from a common pool, so no single name word identifies a type.
    With ``dev_entity_fraction > 0`` a share of entities is reserved for a dev
    split whose surfaces never occur in the training mentions.
    With ``oov_names`` the name words are left out of the embedding table,
    so every mention string encodes to the unknown-word vector.
    ``context_pool`` restricts sentences to that many distinct context words.
    """
    rng = np.random.default_rng(seed)
    vocab = TypeVocabulary(tree)
    leaves = [t for t in vocab.types if not any(o.parent == t for o in vocab.types)]
    mapping = KbTypeMapping({f"kb.{'.'.join(t.segments)}": [t] for t in vocab.types}, vocab)
    kb_name = {t: f"kb.{'.'.join(t.segments)}" for t in vocab.types}

    words = [f"w{i}" for i in range(vocab_size)]
    n_surface = min(2 * n_entities, vocab_size // 3) if not shared_names else vocab_size // 5
    surface_words, context_words = words[:n_surface], words[n_surface:]
    surface_pool = list(rng.permutation(surface_words))
    sentence_words = context_words[:context_pool] if context_pool else context_words

    entities, names, leaf_of = [], [], []
    used_pairs = set()
    person_leaves = [t for t in leaves if t in vocab.person_fine_types]
    for i in range(n_entities):
        leaf = leaves[rng.integers(len(leaves))]
        types = [leaf]
        if leaf in vocab.person_fine_types and len(person_leaves) > 1 and rng.random() < 0.4:
            other = [t for t in person_leaves if t != leaf]
            types.append(other[rng.integers(len(other))])
        if shared_names:
            while True:
                a, b = rng.choice(len(surface_words), 2, replace=False)
                if (a, b) not in used_pairs:
                    used_pairs.add((a, b))
                    break
            name = [surface_words[a], surface_words[b]]
        else:
            n_words = 2 if len(surface_pool) >= 2 * (n_entities - i) and rng.random() < 0.5 else 1
            name = [surface_pool.pop() for _ in range(n_words)] if surface_pool else [f"e{i}"]
        eid = f"E{i:03d}"
        entities.append({"id": eid, "title": " ".join(name), "types": [kb_name[t] for t in types]})
        names.append(name)
        leaf_of.append(types)

    entity_split = {}
    if dev_entity_fraction > 0:
        n_dev = max(1, int(round(dev_entity_fraction * n_entities)))
        for i in rng.permutation(n_entities)[:n_dev]:
            entity_split[entities[i]["id"]] = "dev"

    anchor_pairs = []
    for i, e in enumerate(entities):
        surface = " ".join(names[i])
        main = int(rng.integers(3, 11))
        anchor_pairs += [(surface, e["id"])] * main
        if rng.random() < 0.3:
            j = int(rng.integers(n_entities))
            if j != i:
                anchor_pairs += [(surface, entities[j]["id"])] * int(rng.integers(1, main))
    order = rng.permutation(len(anchor_pairs))
    anchor_pairs = [anchor_pairs[i] for i in order]

    kb = KnowledgeBase.build(entities, anchor_pairs, mapping)
    vectors = rng.normal(0.0, 0.3, (vocab_size, dim)).astype(np.float32)
    if oov_names:
        vectors, words = vectors[n_surface:], context_words
    embeddings = EmbeddingTable.from_vectors(words, vectors, seed)

    examples = []
    for m in range(n_mentions):
        i = m % n_entities if m < n_entities else int(rng.integers(n_entities))
        n = int(rng.integers(*sentence_length))
        ctx = [sentence_words[j] for j in rng.integers(len(sentence_words), size=n)]
        start = int(rng.integers(0, n))
        tokens = ctx[:start] + names[i] + ctx[start:]
        labels = vocab.expand_with_ancestors(mapping.map(entities[i]["types"]))
        examples.append(MentionExample(f"doc{m:04d}", tuple(tokens), (start, start + len(names[i])),
                                       frozenset(labels), entities[i]["id"]))
    return SyntheticWorld(vocab, mapping, kb, embeddings, entities, anchor_pairs, examples, entity_split)
