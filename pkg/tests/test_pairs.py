import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zrkit import pairs
from zrkit.corpus_io import (FeatureSequence, ManifestEntry, UtdPairEntry, UtteranceManifest,
                             WordAlignmentEntry)
from zrkit.errors import FormatError, ZrkitError
from zrkit.pairs import PairConstraints, SegmentRecord


@pytest.fixture
def manifest():
    return UtteranceManifest([ManifestEntry(f"u{k}", "AB"[k % 2], f"u{k}.wav")
                              for k in range(6)])


def seg(utt, word, spk, start=0, end=10):
    return SegmentRecord(utt, start, end, spk, word)


class TestSelection:
    def test_constraints(self, manifest):
        ali = [WordAlignmentEntry("u0", "water", 0.0, 0.6),
               WordAlignmentEntry("u1", "water", 0.0, 0.49),
               WordAlignmentEntry("u2", "cat", 0.0, 2.0)]
        kept = pairs.select_segments(ali, manifest)
        assert [(s.utterance_id, s.word) for s in kept] == [("u0", "water")]

    def test_exactly_half_a_second_is_kept(self, manifest):
        ali = [WordAlignmentEntry("u0", "water", 0.6, 1.1)]
        assert len(pairs.select_segments(ali, manifest)) == 1

    def test_frame_grid(self, manifest):
        ali = [WordAlignmentEntry("u0", "water", 0.50, 1.10)]
        (s,) = pairs.select_segments(ali, manifest)
        assert (s.start_frame, s.end_frame) == (50, 110)
        assert s.speaker_id == "A"

    def test_characters_are_code_points(self, manifest):
        ali = [WordAlignmentEntry("u0", "日本語です", 0.0, 1.0),
               WordAlignmentEntry("u1", "日本語", 0.0, 1.0)]
        assert [s.word for s in pairs.select_segments(ali, manifest)] == ["日本語です"]

    def test_unknown_utterance(self, manifest):
        with pytest.raises(ZrkitError, match="unknown"):
            pairs.select_segments([WordAlignmentEntry("q", "water", 0, 1)], manifest)

    def test_idempotent_and_order_preserving(self, manifest):
        ali = [WordAlignmentEntry(f"u{k}", w, 0.0, 0.5 + 0.1 * k)
               for k, w in enumerate(["zebra", "apple", "mango", "zebra"])]
        first = pairs.select_segments(ali, manifest)
        assert [s.utterance_id for s in first] == ["u0", "u1", "u2", "u3"]
        assert pairs.select_segments(ali, manifest) == first

    def test_bad_constraints(self):
        with pytest.raises(ZrkitError):
            PairConstraints(min_chars=0)


class TestGoldPairs:
    def test_three_tokens(self):
        segs = [seg(f"u{k}", "water", "A") for k in range(3)]
        assert len(pairs.make_gold_pairs(segs)) == 3

    def test_per_type(self):
        segs = [seg("u0", "w1", "A"), seg("u1", "w1", "B"),
                seg("u2", "w2", "A"), seg("u3", "w2", "B"), seg("u4", "w2", "A")]
        gold = pairs.make_gold_pairs(segs)
        assert len(gold) == 4
        assert {p.category for p in gold} <= {"SW-SP", "SW-DP"}

    def test_duplicate_segment(self):
        with pytest.raises(ZrkitError, match="duplicate"):
            pairs.make_gold_pairs([seg("u0", "w", "A"), seg("u0", "w", "A")])


class TestEvalPairs:
    def test_enumeration(self):
        evp, counts = pairs.make_eval_pairs(
            [seg("u0", "w1", "A"), seg("u1", "w1", "B"), seg("u2", "w2", "A")])
        assert counts["SW-DP"] == 1 and counts["DW"] == 2 and counts["SW-SP"] == 0

    def test_all_distinct_words(self):
        segs = [seg(f"u{k}", f"w{k}", "A") for k in range(7)]
        _, counts = pairs.make_eval_pairs(segs)
        assert counts["SW"] == 0 and counts["DW"] == math.comb(7, 2)

    def test_counts_match_recount(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(2, 30))
            segs = [seg(f"u{k}", f"w{rng.integers(4)}", "ABC"[rng.integers(3)])
                    for k in range(n)]
            evp, counts = pairs.make_eval_pairs(segs)
            recount = {"SW-SP": 0, "SW-DP": 0, "DW": 0}
            for a, b in itertools.combinations(segs, 2):
                if a.word != b.word:
                    recount["DW"] += 1
                elif a.speaker_id == b.speaker_id:
                    recount["SW-SP"] += 1
                else:
                    recount["SW-DP"] += 1
            for key, value in recount.items():
                assert counts[key] == value
            assert counts["SW"] + counts["DW"] == math.comb(n, 2) == len(evp)

    def test_no_self_pairs_or_duplicates(self):
        segs = [seg(f"u{k}", f"w{k % 3}", "AB"[k % 2]) for k in range(10)]
        evp, _ = pairs.make_eval_pairs(segs[::-1])
        keys = [(p.a.key, p.b.key) for p in evp]
        assert len(set(keys)) == len(keys)
        assert all(a < b for a, b in keys)

    def test_too_few_segments(self):
        with pytest.raises(ZrkitError):
            pairs.make_eval_pairs([seg("u0", "w", "A")])


class TestUtd:
    def test_conversion(self, manifest):
        (p,), dropped = pairs.utd_pairs_to_segment_pairs(
            [UtdPairEntry("u0", 0.5, 1.0, "u1", 2.0, 2.6)], manifest)
        assert dropped == 0
        assert (p.a.start_frame, p.a.end_frame) == (50, 100)
        assert (p.b.start_frame, p.b.end_frame) == (200, 260)
        assert p.category == "UTD"

    def test_tiny_fragment_dropped(self, manifest):
        got, dropped = pairs.utd_pairs_to_segment_pairs(
            [UtdPairEntry("u0", 0.5, 0.51, "u1", 2.0, 2.6)], manifest)
        assert got == [] and dropped == 1

    def test_deficit_equals_drops(self, manifest):
        rng = np.random.default_rng(0)
        entries = []
        for n in range(36000):
            start = int(rng.integers(0, 500)) / 100
            length = 0.01 if n % 100 == 0 else 0.5
            entries.append(UtdPairEntry("u0", start, start + length, "u1", 1.0, 1.5))
        got, dropped = pairs.utd_pairs_to_segment_pairs(entries, manifest)
        assert len(got) + dropped == 36000
        assert dropped == 360


def _archive():
    rng = np.random.default_rng(1)
    return [FeatureSequence("u0", rng.normal(size=(20, 3))),
            FeatureSequence("u1", rng.normal(size=(20, 3)))]


class TestFramePairs:
    def test_identical_segments(self):
        archive = _archive()
        a, b = seg("u0", "w", "A", 0, 5), seg("u0", "w", "A", 5, 10)
        archive[0].frames[5:10] = archive[0].frames[0:5]
        fp = pairs.extract_frame_pairs([pairs.SegmentPair(a, b, "SW-SP")], archive, seed=0)
        assert len(fp) == 10
        assert fp.path_lengths == [5]

    def test_length_bounds(self):
        archive = _archive()
        p = pairs.SegmentPair(seg("u0", "w", "A", 0, 3), seg("u1", "w", "B", 0, 5), "SW-DP")
        fp = pairs.extract_frame_pairs([p], archive, seed=0)
        assert 10 <= len(fp) <= 14

    def test_both_directions(self):
        archive = _archive()
        p = pairs.SegmentPair(seg("u0", "w", "A", 0, 4), seg("u1", "w", "B", 2, 9), "SW-DP")
        fp = pairs.extract_frame_pairs([p], archive, seed=3)
        forward = {(tuple(x), tuple(y)) for x, y in zip(fp.inputs, fp.targets)}
        assert all((y, x) in forward for x, y in forward)

    def test_count_is_twice_path_lengths(self):
        archive = _archive()
        ps = [pairs.SegmentPair(seg("u0", "w", "A", s, s + 6), seg("u1", "w", "B", s, s + 9),
                                "SW-DP") for s in range(0, 10, 3)]
        fp = pairs.extract_frame_pairs(ps, archive, seed=0)
        assert len(fp) == 2 * sum(fp.path_lengths)

    def test_deterministic_and_jobs_independent(self):
        archive = _archive()
        ps = [pairs.SegmentPair(seg("u0", "w", "A", s, s + 6), seg("u1", "w", "B", s, s + 9),
                                "SW-DP") for s in range(0, 10, 2)]
        one = pairs.extract_frame_pairs(ps, archive, seed=7)
        two = pairs.extract_frame_pairs(ps, archive, seed=7, jobs=3)
        assert one.inputs.tobytes() == two.inputs.tobytes()
        assert one.targets.tobytes() == two.targets.tobytes()
        other = pairs.extract_frame_pairs(ps, archive, seed=8)
        assert other.inputs.tobytes() != one.inputs.tobytes()

    def test_segment_past_end(self):
        p = pairs.SegmentPair(seg("u0", "w", "A", 15, 25), seg("u1", "w", "B", 0, 5), "SW-DP")
        with pytest.raises(ZrkitError, match="exceeds"):
            pairs.extract_frame_pairs([p], _archive(), seed=0)

    def test_empty(self):
        with pytest.raises(ZrkitError):
            pairs.extract_frame_pairs([], _archive(), seed=0)


class TestTsv:
    def test_round_trip(self, tmp_path):
        segs = [seg("u0", "w1", "A", 3, 9), seg("u1", "w1", "B"), seg("u2", "w2", "A")]
        pairs.write_segments(segs, tmp_path / "s.tsv")
        assert pairs.read_segments(tmp_path / "s.tsv") == segs
        evp, _ = pairs.make_eval_pairs(segs)
        pairs.write_pairs(evp, tmp_path / "p.tsv")
        assert pairs.read_pairs(tmp_path / "p.tsv") == evp

    def test_contradictory_category(self, tmp_path):
        p = tmp_path / "p.tsv"
        p.write_text("u0\tA\tw1\t0\t5\tu1\tB\tw2\t0\t5\tSW-DP\n")
        with pytest.raises(FormatError, match=":1: .*contradicts"):
            pairs.read_pairs(p)

    def test_field_count(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("u0\tA\tw1\t0\n")
        with pytest.raises(FormatError, match="expected 5"):
            pairs.read_segments(p)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 100, allow_nan=False), st.floats(0.02, 5, allow_nan=False))
def test_frame_conversion_covers_interval(start, length):
    s, e = pairs.seconds_to_frames(start, start + length, 0.01)
    assert s * 0.01 <= start + 1e-6
    assert e * 0.01 >= start + length - 1e-6
    assert e > s
