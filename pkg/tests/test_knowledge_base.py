import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from fetel.errors import FormatVersionMismatch, IoFailure, UnknownEntity
from fetel.knowledge_base import (IngestReport, KnowledgeBase, commonness, ingest_anchors,
                                  load_snapshot, save_snapshot)

from conftest import TRUMP_ANCHORS

pairs_strategy = st.lists(st.tuples(st.sampled_from(["trump", "Trump ", "matt", "federal way", "x"]),
                                    st.sampled_from(["E1", "E2", "E3"])), max_size=40)


class TestIngest:
    def test_hand_count(self):
        stats = ingest_anchors(TRUMP_ANCHORS)
        assert dict(stats.counts["trump"]) == {"E1": 3, "E2": 1}
        assert stats.totals["trump"] == 4

    def test_empty(self):
        assert len(ingest_anchors([])) == 0

    def test_whitespace_normalization(self):
        stats = ingest_anchors([("  Trump ", "E1"), ("Federal \t  Way", "E2")])
        assert dict(stats.counts["trump"]) == {"E1": 1}
        assert "federal way" in stats.counts

    def test_blank_surface_skipped_and_tallied(self):
        report = IngestReport()
        stats = ingest_anchors([("   ", "E1"), ("Trump", "E1")], report)
        assert report.skipped_empty == 1 and report.pairs == 2
        assert stats.totals["trump"] == 1

    @given(pairs_strategy)
    def test_totals_consistent(self, pairs):
        stats = ingest_anchors(pairs)
        for s, row in stats.counts.items():
            assert stats.totals[s] == sum(row.values())
            assert all(c > 0 for c in row.values())

    @given(pairs_strategy, pairs_strategy)
    def test_additive(self, a, b):
        assert ingest_anchors(a + b) == ingest_anchors(a).merge(ingest_anchors(b))

    @given(pairs_strategy, st.randoms())
    def test_permutation_invariant(self, pairs, rnd):
        shuffled = list(pairs)
        rnd.shuffle(shuffled)
        assert ingest_anchors(pairs) == ingest_anchors(shuffled)


class TestCommonness:
    def test_hand_values(self):
        stats = ingest_anchors(TRUMP_ANCHORS)
        assert commonness(stats, "trump", "E1") == 0.75
        assert commonness(stats, "trump", "E2") == 0.25
        assert commonness(stats, "obama", "E1") == 0.0
        assert commonness(stats, "trump", "E9") == 0.0

    @given(pairs_strategy)
    def test_normalized(self, pairs):
        stats = ingest_anchors(pairs)
        for s, row in stats.counts.items():
            assert sum(stats.commonness(s, e) for e in row) == pytest.approx(1.0, abs=1e-12)


class TestEntities:
    def test_lookup(self, kb):
        assert kb.entity_types("E1") == ["kb.politician", "kb.tv_host", "kb.businessperson"]
        assert kb.get("E1").is_person
        assert not kb.get("E_fw").is_person

    def test_unknown(self, kb):
        with pytest.raises(UnknownEntity):
            kb.entity_types("nope")

    def test_no_types(self, kb):
        assert kb.entity_types("E2") == []


class TestSnapshot:
    def test_round_trip(self, kb, tmp_path):
        path = tmp_path / "kb.snap"
        save_snapshot(kb, path)
        loaded = load_snapshot(path)
        assert loaded.entities == kb.entities
        assert loaded.anchors == kb.anchors
        for s in kb.anchors.surfaces():
            for e in kb.entities:
                assert loaded.commonness(s, e) == kb.commonness(s, e)

    @pytest.mark.parametrize("keep", [0, 5, 30, -3])
    def test_truncated(self, kb, tmp_path, keep):
        path = tmp_path / "kb.snap"
        save_snapshot(kb, path)
        data = path.read_bytes()
        path.write_bytes(data[:keep] if keep >= 0 else data[:keep - 10])
        with pytest.raises(IoFailure):
            load_snapshot(path)

    def test_wrong_version(self, kb, tmp_path):
        path = tmp_path / "kb.snap"
        save_snapshot(kb, path)
        path.write_text(path.read_text().replace("FETEL-KB\t1", "FETEL-KB\t99", 1))
        with pytest.raises(FormatVersionMismatch):
            load_snapshot(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            load_snapshot(tmp_path / "absent")

    def test_across_processes(self, tmp_path):
        path = tmp_path / "kb.snap"
        save_snapshot(KnowledgeBase.build([{"id": "E1"}, {"id": "E2"}], TRUMP_ANCHORS), path)
        code = ("from fetel.knowledge_base import load_snapshot; import sys; "
                "print(load_snapshot(sys.argv[1]).commonness('trump', 'E1'))")
        out = subprocess.run([sys.executable, "-c", code, str(path)], capture_output=True, text=True, check=True)
        assert float(out.stdout) == 0.75
