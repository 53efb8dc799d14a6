"""Release acceptance checks, one test per criterion.

A pass/fail line per criterion is printed in the terminal summary.
"""

import random
import time

import numpy as np
import pytest
import torch

from fetel.corpus import MentionExample
from fetel.entity_linker import link_mention
from fetel.evaluation import evaluate, macro_f1, micro_f1, strict_accuracy
from fetel.features import featurize, make_batch, predict_scores
from fetel.knowledge_base import KnowledgeBase, load_snapshot, save_snapshot
from fetel.model import ModelConfig, TypingModel, load_checkpoint, save_checkpoint
from fetel.synthetic import NON_PERSON_TREE, make_world
from fetel.training import (TrainingConfig, apply_nil_dropout, hinge_loss, hinge_loss_tensor,
                            noisy_epoch_features, train)
from fetel.type_system import TypeVocabulary, parse_type_path

from conftest import TRUMP_ANCHORS
from test_evaluation import HAND_FIXTURE, brute_metrics, random_pairs

P = parse_type_path


def brute_hinge(scores, gold_paths, type_strings, lambda_p):
    """Loss written out from path strings alone."""
    total = 0.0
    for s, t in zip(scores, type_strings):
        if t in gold_paths:
            total += max(0.0, 1.0 - s)
        else:
            fine_person = t.startswith("/person/")
            total += (lambda_p if fine_person else 1.0) * max(0.0, 1.0 + s)
    return total


def random_tree(rng, k):
    tops = ["/person", "/location", "/organization", "/event", "/product"]
    types = ["/person"]
    while len(types) < k:
        top = tops[rng.integers(len(tops))]
        if top not in types:
            types.append(top)
        else:
            types.append(f"{top}/c{len(types)}")
    return types


def test_criterion_1_loss_oracle():
    start = time.perf_counter()
    vocab3 = TypeVocabulary(["/person", "/person/politician", "/location"])
    assert hinge_loss([0.5, -2.0, 0.2], {P("/person")}, vocab3, 1.0) == pytest.approx(1.7, abs=1e-12)
    assert hinge_loss([0.5, 0.2, -2.0], {P("/person")}, vocab3, 2.0) == pytest.approx(2.9, abs=1e-12)

    rng = np.random.default_rng(0)
    for _ in range(1000):
        k = int(rng.integers(1, 21))
        types = random_tree(rng, k)
        vocab = TypeVocabulary(types)
        scores = rng.uniform(-3, 3, k)
        gold = {types[i] for i in range(k) if rng.random() < 0.3}
        closed = {str(t) for t in vocab.expand_with_ancestors({P(t) for t in gold})}
        lam = float(rng.uniform(1, 3))
        expected = brute_hinge(scores, closed, types, lam)
        assert hinge_loss(scores, {P(t) for t in closed}, vocab, lam) == pytest.approx(expected, abs=1e-6)
        target = torch.tensor([[float(t in closed) for t in types]], dtype=torch.float64)
        weights = torch.tensor(vocab.penalty_vector(lam), dtype=torch.float64)
        got = hinge_loss_tensor(torch.tensor(scores)[None], target, weights).item()
        assert got == pytest.approx(expected, abs=1e-6)
    assert time.perf_counter() - start < 5


def test_criterion_2_metric_oracle():
    start = time.perf_counter()
    assert strict_accuracy(HAND_FIXTURE) == 0.5
    assert macro_f1(HAND_FIXTURE)[2] == pytest.approx(0.857142, abs=1e-6)
    assert micro_f1(HAND_FIXTURE)[2] == pytest.approx(0.8, abs=1e-9)
    rng = random.Random(42)
    for _ in range(1000):
        pairs = random_pairs(rng, rng.randint(1, 6))
        s, macro, micro = brute_metrics(pairs)
        assert strict_accuracy(pairs) == pytest.approx(s, abs=1e-9)
        assert macro_f1(pairs) == pytest.approx(macro, abs=1e-9)
        assert micro_f1(pairs) == pytest.approx(micro, abs=1e-9)
    assert time.perf_counter() - start < 5


def test_criterion_3_commonness():
    start = time.perf_counter()
    kb = KnowledgeBase.build([{"id": "E1"}, {"id": "E2"}], TRUMP_ANCHORS)
    assert kb.commonness("trump", "E1") == 0.75
    assert sum(kb.commonness("trump", e) for e in kb.entities) == 1.0

    rng = np.random.default_rng(3)
    for _ in range(1000):
        n_e = int(rng.integers(1, 8))
        ids = [f"Q{int(i)}" for i in rng.permutation(20)[:n_e]]
        pairs = [("name", ids[int(rng.integers(n_e))]) for _ in range(int(rng.integers(1, 30)))]
        kb = KnowledgeBase.build([{"id": e} for e in ids], pairs)
        counts = {e: sum(1 for _, x in pairs if x == e) for e in ids}
        best = max(counts.values())
        expected = min(e for e in ids if counts[e] == best)
        result = link_mention(kb, "Name")
        assert result.entity_id == expected
        assert result.confidence == best / len(pairs)
    assert time.perf_counter() - start < 5


def test_criterion_4_gradient_check():
    start = time.perf_counter()
    words = [f"v{i}" for i in range(50)]
    rng = np.random.default_rng(4)
    from fetel.corpus import EmbeddingTable
    table = EmbeddingTable.from_vectors(words, rng.normal(size=(50, 8)), seed=4)
    vocab = TypeVocabulary(["/person", "/person/politician", "/location"])
    config = ModelConfig(embed_dim=8, recurrent_hidden=6, mlp_hidden=10, type_embed_dim=10, seed=4)
    model = TypingModel(config, vocab.k, table).double().eval()
    # running statistics away from the identity so the normalization is exercised
    with torch.no_grad():
        for norm in model.norms:
            norm.running_mean.uniform_(-0.5, 0.5)
            norm.running_var.uniform_(0.5, 2.0)
            norm.weight.uniform_(0.5, 1.5)
            norm.bias.uniform_(-0.2, 0.2)
    weights = torch.tensor(vocab.penalty_vector(2.0), dtype=torch.float64)
    params = [model.type_embeddings] + [p for m in (model.norms, model.dense) for p in m.parameters()]
    kb = KnowledgeBase.build([], [])

    for trial in range(20):
        n = int(rng.integers(3, 10))
        tokens = [words[i] for i in rng.integers(50, size=n)]
        a = int(rng.integers(n))
        ex = MentionExample("d", tuple(tokens), (a, int(rng.integers(a + 1, n + 1))),
                            vocab.expand_with_ancestors({vocab.types[int(rng.integers(3))]}))
        [feat] = featurize([ex], model, kb, None, vocab)
        feat = type(feat)(**{**feat.__dict__, "kb_labels": frozenset(
            t for t in vocab.types if rng.random() < 0.5),
            "link": type(feat.link)("X", float(rng.uniform(0.1, 1)), ex.surface)})
        batch = make_batch([feat], vocab, with_targets=True)

        def loss():
            return hinge_loss_tensor(model(batch), batch.targets.double(), weights).sum()

        model.zero_grad()
        loss().backward()
        eps = 1e-5
        for p in params:
            analytic = p.grad.detach().clone().reshape(-1)
            flat = p.data.view(-1)
            for j in range(flat.numel()):
                orig = flat[j].item()
                with torch.no_grad():
                    flat[j] = orig + eps
                    up = loss().item()
                    flat[j] = orig - eps
                    down = loss().item()
                    flat[j] = orig
                numeric = (up - down) / (2 * eps)
                a_j = analytic[j].item()
                scale = max(abs(a_j), abs(numeric), 1e-6)
                assert abs(a_j - numeric) / scale < 1e-4, (trial, j, a_j, numeric)
    assert time.perf_counter() - start < 60


def test_criterion_5_overfitting_sanity():
    world = make_world(n_mentions=200, vocab_size=500, seed=0)
    assert len(world.vocab.types) == 12 and len(world.examples) == 200

    def run():
        return train(world.examples, world.examples, world.kb, world.mapping, world.vocab,
                     world.embeddings, training_config=TrainingConfig(max_epochs=100, seed=0))

    start = time.perf_counter()
    first = run()
    elapsed = time.perf_counter() - start
    assert elapsed < 300
    assert len(first.log) <= 100
    assert max(e["dev_strict"] for e in first.log) >= 0.95
    final = evaluate(first.model, world.examples, world.kb, world.mapping, world.vocab)
    assert final.strict_accuracy >= 0.95
    second = run()
    assert second.log == first.log


def test_criterion_6_el_ablation():
    world = make_world(n_mentions=800, n_entities=800, tree=NON_PERSON_TREE, dev_entity_fraction=0.1,
                       shared_names=True, oov_names=True, context_pool=1, sentence_length=(8, 9), seed=1)
    train_set, dev_set = world.split_by_entity()
    assert dev_set and not {e.anchor_target for e in dev_set} & {e.anchor_target for e in train_set}
    cfg = TrainingConfig(batch_size=64, max_epochs=30, patience=10)
    strict = {}
    for use_el in (True, False):
        result = train(train_set, dev_set, world.kb, world.mapping, world.vocab, world.embeddings,
                       ModelConfig(dropout_rate=0.0, use_el_features=use_el), cfg)
        strict[use_el] = evaluate(result.model, dev_set, world.kb, world.mapping, world.vocab).strict_accuracy
    print(f"dev strict with EL {strict[True]:.3f}, without EL {strict[False]:.3f}")
    assert strict[True] >= 0.9
    assert strict[False] <= 0.5


def test_criterion_7_noise_mechanisms(vocab, kb, mapping, toy_embeddings, figure_example):
    model = TypingModel(ModelConfig(embed_dim=4, recurrent_hidden=3, mlp_hidden=6, type_embed_dim=5),
                        vocab.k, toy_embeddings)
    [feat] = featurize([figure_example], model, kb, mapping, vocab)
    entity = kb.get(feat.link.entity_id)
    weak_labels = vocab.expand_with_ancestors(mapping.map(entity.kb_types))
    assert feat.is_person and feat.kb_labels == weak_labels
    assert vocab.person_fine_types - weak_labels

    cfg = TrainingConfig(nil_dropout_rate=0.0)
    rng = np.random.default_rng(7)
    for _ in range(1000):
        [noisy], _ = noisy_epoch_features([feat], vocab, cfg, rng)
        assert noisy.kb_labels != weak_labels
        added = noisy.kb_labels - weak_labels
        assert added and added <= vocab.person_fine_types
        assert not added & weak_labels
        assert noisy.example.labels == figure_example.labels

    out = apply_nil_dropout([feat] * 10_000, 0.5, np.random.default_rng(8))
    assert 4850 <= sum(f.link.is_nil for f in out) <= 5150


def test_criterion_8_persistence(tmp_path, vocab, kb, mapping, toy_embeddings, figure_example):
    save_snapshot(kb, tmp_path / "kb.snap")
    loaded = load_snapshot(tmp_path / "kb.snap")
    assert loaded.entities == kb.entities
    for surface in kb.anchors.surfaces():
        for entity_id in kb.anchors.candidates(surface):
            assert loaded.commonness(surface, entity_id) == kb.commonness(surface, entity_id)

    model = TypingModel(ModelConfig(embed_dim=4, recurrent_hidden=3, mlp_hidden=6, type_embed_dim=5, seed=8),
                        vocab.k, toy_embeddings)
    # move normalization statistics off their initial values
    model.train()
    feats = featurize([figure_example] * 4, model, kb, mapping, vocab)
    model(make_batch(feats, vocab))
    before = predict_scores(model, feats, vocab)
    save_checkpoint(model, vocab, mapping, tmp_path / "model")
    model2, vocab2, mapping2 = load_checkpoint(tmp_path / "model")
    after = predict_scores(model2, featurize([figure_example] * 4, model2, loaded, mapping2, vocab2), vocab2)
    assert torch.equal(before, after)
