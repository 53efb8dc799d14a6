"""
Weak labels from anchor links
=============================

An anchor in running text is a free training mention: its target entity has
types in the KB, and a mapping turns those into target types. The label set
is closed under ancestors, so a politician is also a person.
"""

from fetel import KbTypeMapping, KnowledgeBase, TypeVocabulary
from fetel.corpus import AnchorDocument, WeakLabelReport, generate_weak_labels

vocab = TypeVocabulary(["/person", "/person/politician", "/person/tv_personality", "/person/business",
                        "/person/actor", "/location", "/location/city"])
mapping = KbTypeMapping({"government.politician": ["/person/politician"],
                         "tv.tv_personality": ["/person/tv_personality"],
                         "business.board_member": ["/person/business"],
                         "location.citytown": ["/location/city"]}, vocab)

kb = KnowledgeBase.build(
    [{"id": "E1", "title": "Donald Trump",
      "types": ["government.politician", "tv.tv_personality", "business.board_member"]},
     {"id": "E9", "title": "Federal Way", "types": ["location.citytown"]},
     {"id": "E7", "title": "Some artwork", "types": ["visual_art.artwork"]}],
    [("Donald Trump", "E1"), ("Federal Way", "E9")], mapping)

sentence = "Earlier on Tuesday , Donald Trump pledged to help hard-hit U.S. farmers".split()
docs = [
    AnchorDocument("news1", tuple(sentence), ((4, 6, "E1"),)),
    # an unmappable target and an entity missing from the KB are both skipped
    AnchorDocument("news2", ("They", "visited", "Federal", "Way", "and", "the", "mural"),
                   ((2, 4, "E9"), (6, 7, "E7"), (0, 1, "E404"))),
]

report = WeakLabelReport()
for ex in generate_weak_labels(docs, kb, mapping, vocab, report):
    print(f"{ex.surface!r:>16}: {sorted(map(str, ex.labels))}")
print(report)

# %%
# The labels ignore context: every mention of Trump gets all three person
# types even when the sentence only supports one. That is the noise the
# trained model has to see through.
