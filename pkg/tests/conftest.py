import numpy as np
import pytest

from fetel.corpus import EmbeddingTable, MentionExample
from fetel.knowledge_base import KnowledgeBase
from fetel.type_system import KbTypeMapping, TypeVocabulary

FIGURE_TYPES = [
    "/person", "/person/politician", "/person/tv_personality", "/person/business",
    "/person/actor", "/person/author",
    "/location", "/location/city",
    "/organization", "/organization/company",
]


@pytest.fixture
def vocab():
    return TypeVocabulary(FIGURE_TYPES)


@pytest.fixture
def mapping(vocab):
    return KbTypeMapping({
        "kb.politician": ["/person/politician"],
        "kb.tv_host": ["/person/tv_personality"],
        "kb.businessperson": ["/person/business"],
        "kb.actor": ["/person/actor"],
        "kb.author": ["/person/author"],
        "kb.citytown": ["/location/city"],
        "kb.company": ["/organization/company"],
    }, vocab)


TRUMP_ANCHORS = [("Trump", "E1"), ("Trump", "E1"), ("Trump", "E1"), ("Trump", "E2")]


@pytest.fixture
def kb(mapping):
    entities = [
        {"id": "E1", "title": "Donald Trump", "types": ["kb.politician", "kb.tv_host", "kb.businessperson"]},
        {"id": "E2", "title": "Trump (card games)", "types": []},
        {"id": "E_damon", "title": "Matt Damon", "types": ["kb.actor"]},
        {"id": "E_matt", "title": "Matt (name)", "types": []},
        {"id": "E_fw", "title": "Federal Way, Washington", "types": ["kb.citytown"]},
        {"id": "E_fed", "title": "Federal government", "types": ["kb.company"]},
        {"id": "E_odd", "title": "Thing", "types": ["kb.unmapped_thing"]},
    ]
    anchors = TRUMP_ANCHORS + [
        ("Donald Trump", "E1"), ("Donald Trump", "E1"),
        ("Matt Damon", "E_damon"), ("Matt Damon", "E_damon"),
        ("Matt", "E_matt"),
        ("Federal Way", "E_fw"),
        ("Federal", "E_fed"),
        ("Thing", "E_odd"),
    ]
    return KnowledgeBase.build(entities, anchors, mapping)


@pytest.fixture
def toy_embeddings():
    words = ["earlier", "on", "tuesday", ",", "donald", "trump", "pledged", "to", "help", "farmers"]
    rng = np.random.default_rng(3)
    return EmbeddingTable.from_vectors(words, rng.normal(size=(len(words), 4)), seed=1)


FIGURE_SENTENCE = ("Earlier on Tuesday , Donald Trump pledged to help hard-hit U.S. farmers caught in "
                   "the middle of the escalating trade war .").split()


@pytest.fixture
def figure_example(vocab):
    labels = vocab.expand_with_ancestors(["/person/politician"])
    return MentionExample("news1", tuple(FIGURE_SENTENCE), (4, 6), frozenset(labels), "E1")


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or "::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::test_criterion_")[1]
        _ACCEPTANCE.setdefault(name, "PASS" if report.passed else "FAIL")
        if not report.passed:
            _ACCEPTANCE[name] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[0])):
        number, _, label = name.partition("_")
        terminalreporter.write_line(f"criterion {number} ({label.replace('_', ' ')}): {_ACCEPTANCE[name]}")
