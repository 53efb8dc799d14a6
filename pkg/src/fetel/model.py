"""Neural typing model: context, mention-string and KB-type representations
fused by an MLP and scored against type embeddings by dot product."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .corpus import EmbeddingTable
from .errors import ConfigError, DimensionMismatch, IoFailure, SpanOutOfRange
from .knowledge_base import KnowledgeBase
from .type_system import KbTypeMapping, TypePath, TypeVocabulary

PAD, UNK = 0, 1
MULTI_PATH, SINGLE_PATH = "multi_path", "single_path"


@dataclass
class ModelConfig:
    embed_dim: int = 300
    recurrent_hidden: int = 250
    recurrent_layers: int = 2
    mlp_hidden: int = 500
    mlp_layers: int = 3
    type_embed_dim: int = 500
    dropout_rate: float = 0.5
    inter_layer_dropout: float = 0.0
    use_el_features: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("embed_dim", "recurrent_hidden", "recurrent_layers", "mlp_hidden",
                     "mlp_layers", "type_embed_dim"):
            if int(getattr(self, name)) <= 0:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.dropout_rate < 1.0 or not 0.0 <= self.inter_layer_dropout < 1.0:
            raise ConfigError("dropout rates must be in [0, 1)")

    @property
    def context_dim(self) -> int:
        return 2 * self.recurrent_hidden

    def fusion_dim(self, n_types: int) -> int:
        return self.context_dim + self.embed_dim + n_types + 1


class TypingModel(nn.Module):
    """Scores every type in the tag set for one mention.

    Word vectors are frozen; the mention-token vector is trained. Token
    ids: 0 is padding, 1 the unknown word, ``2 + i`` the i-th table word,
    and ``mention_id`` the special mention token.
    """

    def __init__(self, config: ModelConfig, n_types: int, embeddings: EmbeddingTable):
        super().__init__()
        if embeddings.dimension != config.embed_dim:
            raise DimensionMismatch(
                f"embeddings have dimension {embeddings.dimension}, config expects {config.embed_dim}")
        self.config = config
        self.n_types = n_types
        self.words = list(embeddings.words)
        self._index = {w: i + 2 for w, i in embeddings.index.items()}
        self._lower_index = {w: i + 2 for w, i in embeddings.lower_index.items()}
        self.mention_id = len(self.words) + 2

        table = np.vstack([np.zeros((1, config.embed_dim), np.float32),
                           embeddings.unk_vector[None, :], embeddings.vectors])
        with torch.random.fork_rng():
            torch.manual_seed(config.seed)
            self.register_buffer("word_vectors", torch.from_numpy(table.copy()))
            self.mention_vector = nn.Parameter(torch.from_numpy(embeddings.mention_token_vector.copy()))
            self.encoders = nn.ModuleList()
            in_dim = config.embed_dim
            for _ in range(config.recurrent_layers):
                self.encoders.append(nn.LSTM(in_dim, config.recurrent_hidden,
                                             batch_first=True, bidirectional=True))
                in_dim = config.context_dim
            self.norms = nn.ModuleList()
            self.dense = nn.ModuleList()
            in_dim = config.fusion_dim(n_types)
            for i in range(config.mlp_layers):
                out_dim = config.type_embed_dim if i == config.mlp_layers - 1 else config.mlp_hidden
                self.norms.append(nn.BatchNorm1d(in_dim))
                self.dense.append(nn.Linear(in_dim, out_dim))
                in_dim = out_dim
            self.type_embeddings = nn.Parameter(torch.empty(n_types, config.type_embed_dim).uniform_(-0.05, 0.05))

    # token handling

    def token_id(self, word: str) -> int:
        i = self._index.get(word)
        if i is None:
            i = self._lower_index.get(word.lower(), UNK)
        return i

    def context_ids(self, tokens, span) -> tuple[list[int], int]:
        """Ids of the sentence with the span collapsed into the mention token."""
        start, end = _check_span(tokens, span)
        ids = [self.token_id(w) for w in tokens[:start]] + [self.mention_id]
        ids += [self.token_id(w) for w in tokens[end:]]
        return ids, start

    def mention_ids(self, tokens, span) -> list[int]:
        start, end = _check_span(tokens, span)
        return [self.token_id(w) for w in tokens[start:end]]

    # representations

    def _embed(self, ids: torch.Tensor) -> torch.Tensor:
        table = torch.cat([self.word_vectors, self.mention_vector[None, :]], dim=0)
        return F.embedding(ids, table)

    def context_repr(self, ids, lengths, mention_pos) -> torch.Tensor:
        x = self._embed(ids)
        rows = torch.arange(ids.shape[0])
        f_c = 0
        for layer, lstm in enumerate(self.encoders):
            if layer > 0 and self.config.inter_layer_dropout > 0:
                x = F.dropout(x, self.config.inter_layer_dropout, self.training)
            packed = pack_padded_sequence(x, lengths, batch_first=True, enforce_sorted=False)
            out, _ = lstm(packed)
            x, _ = pad_packed_sequence(out, batch_first=True, total_length=ids.shape[1])
            f_c = f_c + x[rows, mention_pos]
        return f_c

    def mention_repr(self, mention_ids, mention_lengths) -> torch.Tensor:
        vecs = F.embedding(mention_ids, self.word_vectors)
        return vecs.sum(dim=1) / mention_lengths.to(vecs.dtype)[:, None]

    def fuse(self, f_c, f_s, f_e, g) -> torch.Tensor:
        """Run ``f_c + f_s + f_e + g`` (concatenated) through the MLP; returns u_m."""
        if g.dim() == 1:
            g = g[:, None]
        if not self.config.use_el_features:
            f_e = torch.zeros_like(f_e)
            g = torch.zeros_like(g)
        x = torch.cat([f_c, f_s, f_e, g], dim=1)
        if x.shape[1] != self.norms[0].num_features:
            raise DimensionMismatch(f"fused vector has {x.shape[1]} components, "
                                    f"MLP expects {self.norms[0].num_features}")
        last = len(self.dense) - 1
        for i, (norm, dense) in enumerate(zip(self.norms, self.dense)):
            if self.training and x.shape[0] == 1:
                # batch statistics are undefined for one sample
                x = F.batch_norm(x, norm.running_mean, norm.running_var, norm.weight, norm.bias,
                                 False, 0.0, norm.eps)
            else:
                x = norm(x)
            x = F.dropout(x, self.config.dropout_rate, self.training)
            x = dense(x)
            if i < last:
                x = F.relu(x)
        return x

    def type_scores(self, u) -> torch.Tensor:
        return u @ self.type_embeddings.t()

    def represent(self, batch) -> torch.Tensor:
        f_c = self.context_repr(batch.token_ids, batch.lengths, batch.mention_pos)
        f_s = self.mention_repr(batch.mention_ids, batch.mention_lengths)
        return self.fuse(f_c, f_s, batch.kb_types.to(f_c.dtype), batch.confidence.to(f_c.dtype))

    def forward(self, batch) -> torch.Tensor:
        return self.type_scores(self.represent(batch))


def _check_span(tokens, span) -> tuple[int, int]:
    start, end = span
    if not tokens or not 0 <= start < end <= len(tokens):
        raise SpanOutOfRange(f"span {list(span)} invalid for {len(tokens)} tokens")
    return start, end


def encode_context(model: TypingModel, tokens, span) -> torch.Tensor:
    ids, pos = model.context_ids(tokens, span)
    t = torch.tensor([ids])
    return model.context_repr(t, torch.tensor([len(ids)]), torch.tensor([pos]))[0]


def encode_mention_string(model: TypingModel, tokens, span) -> torch.Tensor:
    ids = model.mention_ids(tokens, span)
    return model.mention_repr(torch.tensor([ids]), torch.tensor([len(ids)]))[0]


def kb_type_set(entity_id: str | None, kb: KnowledgeBase, mapping: KbTypeMapping,
                vocab: TypeVocabulary) -> frozenset[TypePath]:
    if entity_id is None:
        return frozenset()
    return frozenset(vocab.expand_with_ancestors(mapping.map(kb.entity_types(entity_id))))


def encode_kb_types(link, kb: KnowledgeBase, mapping: KbTypeMapping,
                    vocab: TypeVocabulary) -> tuple[np.ndarray, float]:
    """One-hot of the linked entity's mapped types plus the link confidence.

    NIL links give the all-zero vector and confidence 0.
    """
    if link.entity_id is None:
        return np.zeros(vocab.k, dtype=np.float32), 0.0
    return vocab.one_hot(kb_type_set(link.entity_id, kb, mapping, vocab)), float(link.confidence)


def score_types(model: TypingModel, f_c, f_s, f_e, g) -> torch.Tensor:
    as_t = lambda v: torch.as_tensor(np.asarray(v, dtype=np.float32)) if not torch.is_tensor(v) else v
    f_c, f_s, f_e = as_t(f_c), as_t(f_s), as_t(f_e)
    g = torch.as_tensor([float(g)], dtype=f_c.dtype)
    return model.type_scores(model.fuse(f_c[None], f_s[None], f_e[None].to(f_c.dtype), g[None]))[0]


def decode_prediction(scores, vocab: TypeVocabulary, policy: str = MULTI_PATH) -> set[TypePath]:
    """Positive-score types (or the single best one), closed under ancestors.

    Falls back to the argmax type when nothing scores above zero.
    """
    s = np.asarray(scores.detach().cpu() if torch.is_tensor(scores) else scores, dtype=np.float64)
    if s.shape != (vocab.k,):
        raise DimensionMismatch(f"score vector has shape {s.shape}, expected ({vocab.k},)")
    positive = np.flatnonzero(s > 0)
    if len(positive) == 0 or policy == SINGLE_PATH:
        chosen = [int(np.argmax(s))]
    elif policy == MULTI_PATH:
        chosen = positive.tolist()
    else:
        raise ConfigError(f"unknown decoding policy {policy!r}")
    return vocab.expand_with_ancestors(vocab.types[i] for i in chosen)


def save_checkpoint(model: TypingModel, vocab: TypeVocabulary, mapping: KbTypeMapping, path,
                    extra: dict | None = None) -> Path:
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        meta = {"format": 1, "model": asdict(model.config), "n_types": model.n_types}
        if extra:
            meta.update(extra)
        (path / "config.json").write_text(json.dumps(meta, indent=2) + "\n")
        vocab.save(path / "types.txt")
        mapping.save(path / "mapping.tsv")
        (path / "words.json").write_text(json.dumps(model.words, ensure_ascii=False))
        torch.save(model.state_dict(), path / "params.pt")
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def load_checkpoint(path) -> tuple[TypingModel, TypeVocabulary, KbTypeMapping]:
    """Returns ``(model, vocab, mapping)`` with the model in evaluation mode."""
    path = Path(path)
    try:
        meta = json.loads((path / "config.json").read_text())
        words = json.loads((path / "words.json").read_text())
        state = torch.load(path / "params.pt", map_location="cpu", weights_only=True)
    except (OSError, ValueError, RuntimeError) as exc:
        raise IoFailure(f"cannot read checkpoint {path}: {exc}") from exc
    vocab = TypeVocabulary.load(path / "types.txt")
    mapping = KbTypeMapping.load(path / "mapping.tsv", vocab)
    config = ModelConfig(**meta["model"])
    dim = config.embed_dim
    zeros = np.zeros(dim, np.float32)
    placeholder = EmbeddingTable(dim, words, np.zeros((len(words), dim), np.float32), zeros, zeros)
    model = TypingModel(config, meta["n_types"], placeholder)
    model.load_state_dict(state)
    model.eval()
    return model, vocab, mapping
