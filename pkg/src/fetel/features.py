"""Linking, KB-type lookup and tensor batching for mention examples."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import torch

from .corpus import MentionExample
from .entity_linker import LinkResult, link_examples, nil_result
from .knowledge_base import KnowledgeBase
from .model import TypingModel, kb_type_set
from .type_system import KbTypeMapping, TypePath, TypeVocabulary


@dataclass(frozen=True)
class FeaturizedExample:
    example: MentionExample
    context_ids: tuple[int, ...]
    mention_pos: int
    mention_ids: tuple[int, ...]
    link: LinkResult
    kb_labels: frozenset[TypePath]
    is_person: bool = False

    def as_nil(self) -> FeaturizedExample:
        return replace(self, link=nil_result(self.link.resolved_surface), kb_labels=frozenset(),
                       is_person=False)


class Batch(NamedTuple):
    token_ids: torch.Tensor
    lengths: torch.Tensor
    mention_pos: torch.Tensor
    mention_ids: torch.Tensor
    mention_lengths: torch.Tensor
    kb_types: torch.Tensor
    confidence: torch.Tensor
    targets: torch.Tensor | None = None


def featurize(examples: Sequence[MentionExample], model: TypingModel, kb: KnowledgeBase,
              mapping: KbTypeMapping, vocab: TypeVocabulary,
              links: Sequence[LinkResult] | None = None) -> list[FeaturizedExample]:
    """Link every example (coreference grouped by document) and look up its KB types."""
    if links is None:
        links = link_examples(kb, examples)
    out = []
    for ex, link in zip(examples, links):
        ctx, pos = model.context_ids(ex.tokens, ex.span)
        kb_labels = kb_type_set(link.entity_id, kb, mapping, vocab)
        is_person = link.entity_id is not None and kb.get(link.entity_id).is_person
        out.append(FeaturizedExample(ex, tuple(ctx), pos, tuple(model.mention_ids(ex.tokens, ex.span)),
                                     link, kb_labels, is_person))
    return out


def make_batch(feats: Sequence[FeaturizedExample], vocab: TypeVocabulary,
               with_targets: bool = False) -> Batch:
    n = len(feats)
    max_len = max(len(f.context_ids) for f in feats)
    max_m = max(len(f.mention_ids) for f in feats)
    token_ids = torch.zeros(n, max_len, dtype=torch.long)
    mention_ids = torch.zeros(n, max_m, dtype=torch.long)
    kb_types = torch.zeros(n, vocab.k)
    targets = torch.zeros(n, vocab.k) if with_targets else None
    for i, f in enumerate(feats):
        token_ids[i, :len(f.context_ids)] = torch.tensor(f.context_ids)
        mention_ids[i, :len(f.mention_ids)] = torch.tensor(f.mention_ids)
        for t in f.kb_labels:
            kb_types[i, vocab.index[t]] = 1.0
        if with_targets:
            for t in f.example.labels:
                targets[i, vocab.index[t]] = 1.0
    return Batch(
        token_ids,
        torch.tensor([len(f.context_ids) for f in feats]),
        torch.tensor([f.mention_pos for f in feats]),
        mention_ids,
        torch.tensor([len(f.mention_ids) for f in feats]),
        kb_types,
        torch.tensor([[f.link.confidence] for f in feats], dtype=torch.float32),
        targets,
    )


@torch.no_grad()
def predict_scores(model: TypingModel, feats: Sequence[FeaturizedExample], vocab: TypeVocabulary,
                   batch_size: int = 256) -> torch.Tensor:
    """Evaluation-mode scores, shape ``(len(feats), k)``."""
    was_training = model.training
    model.eval()
    try:
        chunks = [model(make_batch(feats[i:i + batch_size], vocab))
                  for i in range(0, len(feats), batch_size)]
    finally:
        model.train(was_training)
    if not chunks:
        return torch.zeros(0, vocab.k)
    return torch.cat(chunks)
