"""Strict accuracy, macro F1 and micro F1 over (gold, predicted) type sets."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

from .errors import EmptyEvaluation
from .features import featurize, predict_scores
from .model import decode_prediction


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _check(pairs):
    pairs = [(set(g), set(p)) for g, p in pairs]
    if not pairs:
        raise EmptyEvaluation("no mentions to evaluate")
    return pairs


def strict_accuracy(pairs) -> float:
    pairs = _check(pairs)
    return sum(g == p for g, p in pairs) / len(pairs)


def macro_f1(pairs) -> tuple[float, float, float]:
    """Per-mention precision and recall averaged over mentions.

    An empty predicted (or gold) set contributes 0 to the corresponding mean.
    """
    pairs = _check(pairs)
    p = sum(len(g & q) / len(q) if q else 0.0 for g, q in pairs) / len(pairs)
    r = sum(len(g & q) / len(g) if g else 0.0 for g, q in pairs) / len(pairs)
    return p, r, _f1(p, r)


def micro_f1(pairs) -> tuple[float, float, float]:
    pairs = _check(pairs)
    hit = sum(len(g & q) for g, q in pairs)
    n_pred = sum(len(q) for _, q in pairs)
    n_gold = sum(len(g) for g, _ in pairs)
    p = hit / n_pred if n_pred else 0.0
    r = hit / n_gold if n_gold else 0.0
    return p, r, _f1(p, r)


@dataclass
class EvalReport:
    strict_accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    n_mentions: int
    records: list[dict] = field(default_factory=list, repr=False)

    def to_dict(self, with_records: bool = True) -> dict:
        d = asdict(self)
        if not with_records:
            d.pop("records")
        return d


def evaluate_sets(pairs: Sequence) -> EvalReport:
    pairs = _check(pairs)
    mp, mr, mf = macro_f1(pairs)
    ip, ir, iF = micro_f1(pairs)
    records = [{"gold": sorted(map(str, g)), "predicted": sorted(map(str, p)), "exact": g == p}
               for g, p in pairs]
    return EvalReport(strict_accuracy(pairs), mp, mr, mf, ip, ir, iF, len(pairs), records)


def evaluate(model, dataset, kb, mapping, vocab, policy: str = "multi_path",
             batch_size: int = 256) -> EvalReport:
    """Link, featurize, score and decode every mention, then compute all metrics."""
    if not dataset:
        raise EmptyEvaluation("no mentions to evaluate")
    return evaluate_featurized(model, featurize(dataset, model, kb, mapping, vocab), vocab,
                               policy, batch_size)


def evaluate_featurized(model, feats, vocab, policy: str = "multi_path",
                        batch_size: int = 256) -> EvalReport:
    scores = predict_scores(model, feats, vocab, batch_size).numpy()
    pairs = [(f.example.labels, decode_prediction(s, vocab, policy)) for f, s in zip(feats, scores)]
    return evaluate_sets(pairs)
