"""
What the linking features buy
=============================

Here the context words are the same filler for every mention, name words
are out of vocabulary, and every dev entity is unseen in training. The only
route to the right types is the linked entity's KB types, so switching the
linking features off should drop the model to near chance.
"""

from fetel import ModelConfig, TrainingConfig, evaluate, train
from fetel.synthetic import NON_PERSON_TREE, make_world

world = make_world(n_mentions=800, n_entities=800, tree=NON_PERSON_TREE, dev_entity_fraction=0.1,
                   shared_names=True, oov_names=True, context_pool=1, sentence_length=(8, 9), seed=1)
train_set, dev_set = world.split_by_entity()
print(f"train {len(train_set)}  dev {len(dev_set)} (entities never seen in training)")

cfg = TrainingConfig(batch_size=64, max_epochs=30, patience=10)
for use_el in (True, False):
    result = train(train_set, dev_set, world.kb, world.mapping, world.vocab, world.embeddings,
                   ModelConfig(dropout_rate=0.0, use_el_features=use_el), cfg)
    report = evaluate(result.model, dev_set, world.kb, world.mapping, world.vocab)
    name = "with linking" if use_el else "without linking"
    print(f"{name:>16}: dev strict {report.strict_accuracy:.3f}  macro F1 {report.macro_f1:.3f}")
