"""Weighted hinge loss, anti-overfitting noise, and the optimization loop."""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import torch

from .corpus import EmbeddingTable, MentionExample
from .errors import ConfigError, EmptyCorpus, NonFiniteLoss
from .evaluation import evaluate_featurized
from .features import FeaturizedExample, featurize, make_batch
from .knowledge_base import EntityRecord, KnowledgeBase
from .model import MULTI_PATH, ModelConfig, TypingModel
from .type_system import KbTypeMapping, TypePath, TypeVocabulary

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    lambda_p: float = 2.0
    nil_dropout_rate: float = 0.5
    person_noise_enabled: bool = True
    batch_size: int = 256
    learning_rate: float = 1e-3
    max_epochs: int = 50
    patience: int = 5
    grad_clip: float = 5.0
    policy: str = MULTI_PATH
    seed: int = 0

    def __post_init__(self):
        if self.lambda_p < 1:
            raise ConfigError("lambda_p must be >= 1")
        if not 0.0 <= self.nil_dropout_rate <= 1.0:
            raise ConfigError("nil_dropout_rate must be in [0, 1]")
        if self.batch_size <= 0 or self.max_epochs <= 0 or self.patience <= 0:
            raise ConfigError("batch_size, max_epochs and patience must be positive")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be non-negative")


def hinge_loss(scores, gold, vocab: TypeVocabulary, lambda_p: float) -> float:
    """Loss for one mention.

    Gold types are pushed above +1; every other type t below -1, its
    violation scaled by ``penalty_weight(t, lambda_p)``.
    """
    s = np.asarray(scores, dtype=np.float64)
    gold_idx = {vocab.index_of(t) for t in gold}
    total = 0.0
    for i, t in enumerate(vocab.types):
        if i in gold_idx:
            total += max(0.0, 1.0 - s[i])
        else:
            total += vocab.penalty_weight(t, lambda_p) * max(0.0, 1.0 + s[i])
    return total


def hinge_loss_tensor(scores: torch.Tensor, targets: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Vectorized loss; ``targets`` is a 0/1 matrix, ``weights`` the per-type penalties. Returns ``(B,)``."""
    pos = targets * torch.clamp(1.0 - scores, min=0.0)
    neg = (1.0 - targets) * weights * torch.clamp(1.0 + scores, min=0.0)
    return (pos + neg).sum(dim=1)


def inject_person_type_noise(kb_label_set, entity: EntityRecord | None, vocab: TypeVocabulary,
                             rng: np.random.Generator) -> frozenset[TypePath]:
    """Add one random fine-grained person type the set does not already hold.

    Sets of non-person entities come back unchanged. ``entity=None`` means
    the caller has already checked that the link is a person.
    """
    present = set(kb_label_set)
    if entity is not None and not entity.is_person:
        return frozenset(present)
    unused = [t for t in vocab.types if t in vocab.person_fine_types and t not in present]
    if not unused:
        return frozenset(present)
    present.add(unused[rng.integers(len(unused))])
    return frozenset(vocab.expand_with_ancestors(present))


def apply_nil_dropout(batch: Sequence[FeaturizedExample], rate: float,
                      rng: np.random.Generator) -> list[FeaturizedExample]:
    """Independently replace each example's link with NIL with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ConfigError("NIL dropout rate must be in [0, 1]")
    drop = rng.random(len(batch)) < rate
    return [f.as_nil() if d else f for f, d in zip(batch, drop)]


def noisy_epoch_features(feats: Sequence[FeaturizedExample], vocab: TypeVocabulary,
                         config: TrainingConfig, rng: np.random.Generator) -> tuple[list, int]:
    """Apply NIL dropout, then person noise to the surviving person links."""
    out = apply_nil_dropout(feats, config.nil_dropout_rate, rng)
    n_nil = sum(f.link.is_nil and not orig.link.is_nil for f, orig in zip(out, feats))
    if config.person_noise_enabled:
        out = [f if f.link.is_nil or not f.is_person else
               replace(f, kb_labels=inject_person_type_noise(f.kb_labels, None, vocab, rng))
               for f in out]
    return out, n_nil


@dataclass
class TrainResult:
    model: TypingModel
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_strict: float = -1.0


def train(train_set: Sequence[MentionExample], dev_set: Sequence[MentionExample], kb: KnowledgeBase,
          mapping: KbTypeMapping, vocab: TypeVocabulary, embeddings: EmbeddingTable,
          model_config: ModelConfig | None = None, training_config: TrainingConfig | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    """Mini-batch Adam on the weighted hinge loss with dev-based model selection.

    NIL dropout and person-type noise are resampled every epoch. The
    returned model holds the parameters of the epoch with the best dev
    strict accuracy, in evaluation mode.
    """
    model_config = model_config or ModelConfig()
    cfg = training_config or TrainingConfig()
    if not train_set:
        raise EmptyCorpus("training set is empty")
    if not dev_set:
        raise EmptyCorpus("dev set is empty")
    for ex in list(train_set) + list(dev_set):
        if not ex.labels:
            raise EmptyCorpus(f"example in document {ex.doc_id!r} has no labels")

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = TypingModel(model_config, vocab.k, embeddings)
    train_feats = featurize(train_set, model, kb, mapping, vocab)
    dev_feats = featurize(dev_set, model, kb, mapping, vocab)
    weights = torch.tensor(vocab.penalty_vector(cfg.lambda_p), dtype=torch.float32)
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(params, lr=cfg.learning_rate)

    result = TrainResult(model)
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    n = len(train_feats)
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        epoch_feats, n_nil = noisy_epoch_features(train_feats, vocab, cfg, rng)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            chunk = [epoch_feats[i] for i in order[start:start + cfg.batch_size]]
            batch = make_batch(chunk, vocab, with_targets=True)
            losses = hinge_loss_tensor(model(batch), batch.targets, weights)
            loss = losses.mean()
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss.item()} at epoch {epoch}, batch starting {start}")
            optimizer.zero_grad()
            loss.backward()
            if cfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
            optimizer.step()
            total += losses.sum().item()

        report = evaluate_featurized(model, dev_feats, vocab, cfg.policy, cfg.batch_size)
        entry = {"epoch": epoch, "loss": total / n, "dev_strict": report.strict_accuracy,
                 "dev_macro_f1": report.macro_f1, "dev_micro_f1": report.micro_f1, "nil_dropped": n_nil}
        result.log.append(entry)
        if on_epoch:
            on_epoch(entry)
        logger.info("epoch %d loss %.4f dev strict %.4f", epoch, entry["loss"], entry["dev_strict"])

        if report.strict_accuracy > result.best_dev_strict:
            result.best_dev_strict = report.strict_accuracy
            result.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break

    model.load_state_dict(best_state)
    model.eval()
    return result


def write_log(log: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for entry in log:
            f.write(json.dumps(entry) + "\n")
