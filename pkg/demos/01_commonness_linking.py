"""
Linking mentions by commonness
==============================

Anchor links give, for every surface string, a count of the entities it
points to. Linking a mention then means picking the entity the string most
often refers to, and the share of anchors it wins is the confidence.
"""

from fetel import KbTypeMapping, KnowledgeBase, TypeVocabulary, link_in_document, link_mention
from fetel.corpus import MentionExample

# four anchors with the text "Trump": three point to the politician, one to a card game
anchors = [("Trump", "E1"), ("Trump", "E1"), ("Trump", "E1"), ("Trump", "E2"),
           ("Matt Damon", "E_damon"), ("Matt", "E_matt"),
           ("Federal Way", "E_fw"), ("Federal", "E_fed")]
entities = [{"id": "E1", "title": "Donald Trump", "types": ["politician"]},
            {"id": "E2", "title": "Trump (card game)", "types": []},
            {"id": "E_damon", "title": "Matt Damon", "types": ["actor"]},
            {"id": "E_matt", "title": "Matt (name)", "types": []},
            {"id": "E_fw", "title": "Federal Way", "types": ["citytown"]},
            {"id": "E_fed", "title": "Federal Reserve", "types": ["agency"]}]

# the mapping to target types decides which entities count as persons
vocab = TypeVocabulary(["/person", "/person/politician", "/person/actor", "/location", "/location/city",
                        "/organization"])
mapping = KbTypeMapping({"politician": ["/person/politician"], "actor": ["/person/actor"],
                         "citytown": ["/location/city"], "agency": ["/organization"]}, vocab)
kb = KnowledgeBase.build(entities, anchors, mapping)
print("persons:", sorted(e for e, rec in kb.entities.items() if rec.is_person))

print("commonness(trump, E1) =", kb.commonness("trump", "E1"))
print("commonness(trump, E2) =", kb.commonness("trump", "E2"))

# surfaces are normalized before lookup, so case and spacing do not matter
for surface in ["Trump", "  TRUMP ", "Federal Way", "qwzx"]:
    r = link_mention(kb, surface)
    print(f"{surface!r:>14} -> {r.entity_id} (confidence {r.confidence:.2f})")

# %%
# Short person names borrow the link of a longer name in the same document.
# "Matt" alone would link to the name page; next to "Matt Damon" it resolves
# to the actor. The rule only applies to persons: "Federal" stays put.


def mention(doc, text):
    tokens = ("He", "met") + tuple(text.split())
    return MentionExample(doc, tokens, (2, len(tokens)))


doc = [mention("d1", "Matt Damon"), mention("d1", "Matt"),
       mention("d1", "Federal Way"), mention("d1", "Federal")]
for m, r in zip(doc, link_in_document(kb, doc)):
    print(f"{m.surface:>12} -> {r.entity_id} via {r.resolved_surface!r}")
