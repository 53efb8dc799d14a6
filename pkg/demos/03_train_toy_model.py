"""
Training a typing model on a synthetic world
============================================

A generated world bundles a type tree, a KB, anchor statistics, random word
vectors and a set of weakly labeled mentions. Training with the default
settings fits it in a few dozen epochs on a CPU.
"""

import time

from fetel import TrainingConfig, evaluate, train
from fetel.features import featurize, predict_scores
from fetel.model import decode_prediction
from fetel.synthetic import make_world

world = make_world(n_mentions=200, vocab_size=500, seed=0)
print(f"{len(world.examples)} mentions, {world.vocab.k} types, {len(world.kb.entities)} entities")
print("first mention:", " ".join(world.examples[0].tokens), "->", world.examples[0].surface)

# dev = train here: the point is to watch the model fit its own data
start = time.time()
result = train(world.examples, world.examples, world.kb, world.mapping, world.vocab, world.embeddings,
               training_config=TrainingConfig(max_epochs=100),
               on_epoch=lambda e: print(f"epoch {e['epoch']:3d}  loss {e['loss']:.3f}  "
                                        f"strict {e['dev_strict']:.3f}  nil {e['nil_dropped']}"))
print(f"best epoch {result.best_epoch} ({result.best_dev_strict:.3f}) in {time.time() - start:.0f}s")

report = evaluate(result.model, world.examples, world.kb, world.mapping, world.vocab)
print(f"strict {report.strict_accuracy:.3f}  macro F1 {report.macro_f1:.3f}  micro F1 {report.micro_f1:.3f}")

# %%
# Scores are dot products with one learned vector per type; decoding keeps
# every positive type (or the best one if none is positive) plus ancestors.
feats = featurize(world.examples[:3], result.model, world.kb, world.mapping, world.vocab)
for f, s in zip(feats, predict_scores(result.model, feats, world.vocab).numpy()):
    pred = decode_prediction(s, world.vocab)
    print(f"{f.example.surface:>10}  gold {sorted(map(str, f.example.labels))}  pred {sorted(map(str, pred))}")
