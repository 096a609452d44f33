"""
Segment inventories, word-pair sets and DTW-aligned frame pairs.

Seconds are converted to frame indices here and nowhere else:
``start_frame = floor(start / shift)`` and ``end_frame = ceil(end / shift)``
(end exclusive).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import alignment
from .corpus_io import archive_index
from .errors import FormatError, ZrkitError
from .parallel import map_ordered

SW_SP = "SW-SP"
SW_DP = "SW-DP"
DW = "DW"
UTD = "UTD"
CATEGORIES = (SW_SP, SW_DP, DW, UTD)

# absorbs representation error in e.g. 1.10 / 0.01
_GRID_EPS = 1e-6


@dataclass(frozen=True)
class PairConstraints:
    min_chars: int = 5
    min_duration: float = 0.5

    def __post_init__(self):
        if not (self.min_chars > 0 and self.min_duration > 0):
            raise ZrkitError("min_chars and min_duration must be positive")


@dataclass(frozen=True, order=True)
class SegmentRecord:
    utterance_id: str
    start_frame: int
    end_frame: int
    speaker_id: str
    word: str

    def __post_init__(self):
        if not self.end_frame > self.start_frame >= 0:
            raise ZrkitError(f"bad frame span [{self.start_frame}, {self.end_frame})")

    @property
    def key(self):
        return (self.utterance_id, self.start_frame, self.end_frame)

    @property
    def n_frames(self):
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class SegmentPair:
    a: SegmentRecord
    b: SegmentRecord
    category: str


@dataclass
class FramePairSet:
    """Aligned frame pairs: row n of `inputs` should map to row n of `targets`."""

    inputs: np.ndarray
    targets: np.ndarray
    seed: int
    path_lengths: list = None

    def __len__(self):
        return len(self.inputs)


def seconds_to_frames(start, end, frame_shift):
    s = math.floor(start / frame_shift + _GRID_EPS)
    e = math.ceil(end / frame_shift - _GRID_EPS)
    return s, e


def select_segments(alignments, manifest, constraints=PairConstraints(), frame_shift=0.010):
    """Word tokens long enough in both characters and seconds."""
    out = []
    for entry in alignments:
        if entry.utterance_id not in manifest:
            raise ZrkitError(f"alignment references unknown utterance {entry.utterance_id!r}")
        if len(entry.word) < constraints.min_chars:
            continue
        if entry.end - entry.start < constraints.min_duration - 1e-9:
            continue
        s, e = seconds_to_frames(entry.start, entry.end, frame_shift)
        out.append(SegmentRecord(entry.utterance_id, s, e,
                                 manifest.speaker_of(entry.utterance_id), entry.word))
    return out


def _category(a, b):
    if a.word != b.word:
        return DW
    return SW_SP if a.speaker_id == b.speaker_id else SW_DP


def _canonical(a, b, category=None):
    if b.key < a.key:
        a, b = b, a
    return SegmentPair(a, b, _category(a, b) if category is None else category)


def _unique(segments):
    seen = set()
    for s in segments:
        if s.key in seen:
            raise ZrkitError(f"duplicate segment {s.key}")
        seen.add(s.key)


def make_gold_pairs(segments):
    """Every unordered pair of distinct segments with the same word."""
    segments = list(segments)
    _unique(segments)
    by_word = {}
    for s in segments:
        by_word.setdefault(s.word, []).append(s)
    pairs = []
    for group in by_word.values():
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                pairs.append(_canonical(group[i], group[j]))
    return pairs


def category_counts(pairs):
    counts = {c: 0 for c in CATEGORIES}
    for p in pairs:
        counts[p.category] += 1
    counts["SW"] = counts[SW_SP] + counts[SW_DP]
    counts["total"] = len(pairs)
    return counts


def make_eval_pairs(segments):
    """All C(n, 2) segment pairs with their categories, and the category counts."""
    segments = list(segments)
    if len(segments) < 2:
        raise ZrkitError("need at least two segments to build evaluation pairs")
    _unique(segments)
    pairs = [_canonical(segments[i], segments[j])
             for i in range(len(segments)) for j in range(i + 1, len(segments))]
    return pairs, category_counts(pairs)


def utd_pairs_to_segment_pairs(utd_entries, manifest, frame_shift=0.010):
    """Turn discovered fragment pairs into SegmentPairs with category UTD.

    Returns ``(pairs, n_dropped)``; fragments spanning fewer than two frames
    are dropped.
    """
    pairs = []
    dropped = 0
    for e in utd_entries:
        sa, ea = seconds_to_frames(e.start_a, e.end_a, frame_shift)
        sb, eb = seconds_to_frames(e.start_b, e.end_b, frame_shift)
        if ea - sa < 2 or eb - sb < 2:
            dropped += 1
            continue
        a = SegmentRecord(e.utt_a, sa, ea, manifest.speaker_of(e.utt_a), "")
        b = SegmentRecord(e.utt_b, sb, eb, manifest.speaker_of(e.utt_b), "")
        pairs.append(_canonical(a, b, UTD))
    return pairs, dropped


def segment_frames(segment, index):
    """Slice a segment's frames out of an ``{utterance_id: FeatureSequence}`` index."""
    try:
        seq = index[segment.utterance_id]
    except KeyError:
        raise ZrkitError(f"no features for utterance {segment.utterance_id!r}") from None
    if segment.end_frame > seq.n_frames:
        raise ZrkitError(
            f"segment {segment.key} exceeds the {seq.n_frames} frames of "
            f"{segment.utterance_id!r}")
    return np.asarray(seq.frames[segment.start_frame:segment.end_frame], dtype=np.float64)


def extract_frame_pairs(pairs, archive, seed, jobs=1):
    """DTW-align each segment pair and collect frame pairs in both directions.

    Pairs are concatenated in input order before a seeded shuffle, so the
    result is independent of `jobs`.
    """
    pairs = list(pairs)
    if not pairs:
        raise ZrkitError("no segment pairs to align")
    index = archive_index(archive)

    def align(pair):
        xa = segment_frames(pair.a, index)
        xb = segment_frames(pair.b, index)
        path = np.asarray(alignment.dtw(xa, xb, with_path=True).path)
        ia, ib = path[:, 0], path[:, 1]
        # per step: (a_i -> b_j) then (b_j -> a_i)
        src = np.empty((2 * len(path), xa.shape[1]))
        dst = np.empty_like(src)
        src[0::2], dst[0::2] = xa[ia], xb[ib]
        src[1::2], dst[1::2] = xb[ib], xa[ia]
        return src, dst, len(path)

    parts = map_ordered(align, pairs, jobs)
    inputs = np.concatenate([p[0] for p in parts])
    targets = np.concatenate([p[1] for p in parts])
    order = np.random.default_rng(seed).permutation(len(inputs))
    return FramePairSet(inputs[order], targets[order], seed, [p[2] for p in parts])


# ---------------------------------------------------------------------------
# TSV serialization

_SEG_FIELDS = 5


def _seg_row(s):
    return [s.utterance_id, s.speaker_id, s.word, str(s.start_frame), str(s.end_frame)]


def _parse_seg(fields, path, lineno):
    utt, spk, word, start, end = fields
    try:
        return SegmentRecord(utt, int(start), int(end), spk, word)
    except (ValueError, ZrkitError) as exc:
        raise FormatError(f"bad segment fields ({exc})", path, lineno) from None


def _tsv_rows(path, n_fields):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != n_fields:
                raise FormatError(f"expected {n_fields} tab-separated fields, got {len(fields)}",
                                  path, lineno)
            yield lineno, fields


def write_segments(segments, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# utterance_id\tspeaker_id\tword\tstart_frame\tend_frame\n")
        for s in segments:
            fh.write("\t".join(_seg_row(s)) + "\n")


def read_segments(path):
    return [_parse_seg(f, path, n) for n, f in _tsv_rows(path, _SEG_FIELDS)]


def write_pairs(pairs, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# utt_a\tspk_a\tword_a\tstart_a\tend_a\t"
                 "utt_b\tspk_b\tword_b\tstart_b\tend_b\tcategory\n")
        for p in pairs:
            fh.write("\t".join(_seg_row(p.a) + _seg_row(p.b) + [p.category]) + "\n")


def read_pairs(path):
    pairs = []
    for lineno, fields in _tsv_rows(path, 2 * _SEG_FIELDS + 1):
        a = _parse_seg(fields[:_SEG_FIELDS], path, lineno)
        b = _parse_seg(fields[_SEG_FIELDS:-1], path, lineno)
        category = fields[-1]
        if category not in CATEGORIES:
            raise FormatError(f"unknown pair category {category!r}", path, lineno)
        if category != UTD and category != _category(a, b):
            raise FormatError(f"category {category} contradicts the segment labels",
                              path, lineno)
        pairs.append(SegmentPair(a, b, category))
    return pairs
