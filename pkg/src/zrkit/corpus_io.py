"""
Corpus input/output.

Manifests, PCM16 WAV reading, the ``ZRFA`` binary feature archive, word
alignments, UTD pair lists and the text-matrix import path for features
computed by external systems.

All text formats are UTF-8, whitespace separated, and ignore blank lines and
lines starting with ``#``.
"""

import math
import os
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ZrkitError

ARCHIVE_MAGIC = b"ZRFA"
ARCHIVE_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_U32 = struct.Struct("<I")
_DIMS = struct.Struct("<II")
_TIMES = struct.Struct("<dd")


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    audio_path: str


@dataclass
class UtteranceManifest:
    """Ordered list of utterances with the speaker that produced each."""

    entries: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {}
        for n, e in enumerate(self.entries):
            if not e.utterance_id:
                raise ZrkitError("empty utterance id in manifest")
            if not e.speaker_id:
                raise ZrkitError(f"empty speaker id for {e.utterance_id!r}")
            if e.utterance_id in self._index:
                raise ZrkitError(f"duplicate utterance id {e.utterance_id!r}")
            self._index[e.utterance_id] = n

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, utterance_id):
        return utterance_id in self._index

    def speaker_of(self, utterance_id):
        try:
            return self.entries[self._index[utterance_id]].speaker_id
        except KeyError:
            raise ZrkitError(f"unknown utterance {utterance_id!r}") from None

    def speakers(self):
        """Speaker ids in order of first appearance."""
        return list(dict.fromkeys(e.speaker_id for e in self.entries))

    def utterances_of(self, speaker_id):
        return [e.utterance_id for e in self.entries if e.speaker_id == speaker_id]


@dataclass
class FeatureSequence:
    """A T x D feature matrix for one utterance plus its frame timing."""

    utterance_id: str
    frames: np.ndarray
    frame_shift: float = 0.010
    frame_length: float = 0.025

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2:
            raise ZrkitError(
                f"{self.utterance_id}: frames must be 2-D, got shape {self.frames.shape}")
        if self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise ZrkitError(f"{self.utterance_id}: empty feature matrix {self.frames.shape}")
        if not np.all(np.isfinite(self.frames)):
            raise ZrkitError(f"{self.utterance_id}: non-finite feature values")
        if not self.frame_shift > 0:
            raise ZrkitError(f"{self.utterance_id}: frame_shift must be positive")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def dim(self):
        return self.frames.shape[1]


@dataclass(frozen=True)
class WordAlignmentEntry:
    utterance_id: str
    word: str
    start: float
    end: float


@dataclass(frozen=True)
class UtdPairEntry:
    utt_a: str
    start_a: float
    end_a: float
    utt_b: str
    start_b: float
    end_b: float
    score: float = 0.0


# ---------------------------------------------------------------------------
# helpers

def normalize_word(word):
    """Case-fold an orthographic word; no other normalization is applied."""
    return word.casefold()


def _content_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, line


def _parse_float(token, path, lineno, what):
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"non-numeric {what} {token!r}", path, lineno) from None
    if not math.isfinite(value):
        raise FormatError(f"non-finite {what} {token!r}", path, lineno)
    return value


# ---------------------------------------------------------------------------
# manifest

def load_manifest(path):
    """Read ``utterance_id speaker_id audio_path`` lines.

    Relative audio paths are resolved against the manifest's directory.
    """
    base = Path(path).parent
    entries = []
    seen = set()
    for lineno, line in _content_lines(path):
        fields = line.split()
        if len(fields) != 3:
            raise FormatError(f"expected 3 fields, got {len(fields)}", path, lineno)
        utt, spk, audio = fields
        if utt in seen:
            raise FormatError(f"duplicate utterance id {utt!r}", path, lineno)
        seen.add(utt)
        audio_path = Path(audio)
        if not audio_path.is_absolute():
            audio_path = base / audio_path
        entries.append(ManifestEntry(utt, spk, str(audio_path)))
    return UtteranceManifest(entries)


def write_manifest(manifest, path, relative_to=None):
    base = Path(relative_to) if relative_to is not None else Path(path).parent
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest:
            audio = e.audio_path
            try:
                audio = os.path.relpath(audio, base)
            except ValueError:
                pass
            fh.write(f"{e.utterance_id}\t{e.speaker_id}\t{audio}\n")


# ---------------------------------------------------------------------------
# audio

def read_wav(path):
    """Read a 16-bit linear PCM mono WAV file.

    Returns
    -------
    samples : ndarray of float64
        raw sample values divided by 32768, so in [-1, 1).
    sample_rate : int
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such audio file: {path}")
    try:
        with wave.open(str(path), "rb") as w:
            channels = w.getnchannels()
            width = w.getsampwidth()
            rate = w.getframerate()
            if w.getcomptype() != "NONE":
                raise FormatError(f"compressed audio ({w.getcomptype()}) is not supported", path)
            if channels != 1:
                raise FormatError(f"expected mono audio, got {channels} channels", path)
            if width != 2:
                raise FormatError(f"expected 16-bit samples, got {8 * width}-bit", path)
            raw = w.readframes(w.getnframes())
    except wave.Error as exc:
        raise FormatError(f"not a linear PCM WAV file ({exc})", path) from None
    except EOFError:
        raise FormatError("truncated WAV file", path) from None
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples, sample_rate):
    """Write samples in [-1, 1] as 16-bit PCM mono, rounding to nearest."""
    samples = np.asarray(samples, dtype=np.float64)
    ints = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(ints.tobytes())


# ---------------------------------------------------------------------------
# ZRFA archive

def write_records(records, path):
    """Write ``(id, matrix, frame_shift, frame_length)`` records as a ZRFA file.

    Matrices are stored as little-endian float32, row-major.
    """
    records = list(records)
    ids = set()
    for rec_id, _, _, _ in records:
        if rec_id in ids:
            raise ZrkitError(f"duplicate record id {rec_id!r}")
        ids.add(rec_id)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(ARCHIVE_MAGIC, ARCHIVE_VERSION, len(records)))
        for rec_id, matrix, shift, length in records:
            mat = np.asarray(matrix)
            if mat.ndim != 2:
                raise ZrkitError(f"record {rec_id!r}: matrix must be 2-D")
            name = rec_id.encode("utf-8")
            fh.write(_U32.pack(len(name)))
            fh.write(name)
            fh.write(_DIMS.pack(mat.shape[0], mat.shape[1]))
            fh.write(_TIMES.pack(float(shift), float(length)))
            fh.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())
    os.replace(tmp, path)


def read_records(path):
    """Inverse of :func:`write_records`; matrices come back as float32."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError("truncated archive header", path)
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != ARCHIVE_MAGIC:
        raise FormatError(f"bad magic {magic!r}", path)
    if version != ARCHIVE_VERSION:
        raise FormatError(f"unsupported archive version {version}", path)
    offset = _HEADER.size
    records = []
    for n in range(count):
        if offset + _U32.size > len(data):
            raise FormatError(f"truncated record {n}", path)
        (name_len,) = _U32.unpack_from(data, offset)
        offset += _U32.size
        if offset + name_len + _DIMS.size + _TIMES.size > len(data):
            raise FormatError(f"truncated record {n}", path)
        rec_id = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        rows, cols = _DIMS.unpack_from(data, offset)
        offset += _DIMS.size
        shift, length = _TIMES.unpack_from(data, offset)
        offset += _TIMES.size
        nbytes = rows * cols * 4
        if nbytes > len(data) - offset:
            raise FormatError(
                f"record {rec_id!r}: {rows}x{cols} matrix overruns the file", path)
        mat = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset)
        records.append((rec_id, mat.reshape(rows, cols).copy(), shift, length))
        offset += nbytes
    if offset != len(data):
        raise FormatError(f"{len(data) - offset} trailing bytes after last record", path)
    return records


def write_feature_archive(sequences, path):
    write_records(
        ((s.utterance_id, s.frames, s.frame_shift, s.frame_length) for s in sequences), path)


def read_feature_archive(path):
    """Read a ZRFA archive as a list of :class:`FeatureSequence` in file order."""
    out = []
    for rec_id, mat, shift, length in read_records(path):
        try:
            out.append(FeatureSequence(rec_id, mat, shift, length))
        except ZrkitError as exc:
            raise FormatError(str(exc), path) from None
    return out


def archive_index(sequences):
    """Map utterance id -> FeatureSequence."""
    return {s.utterance_id: s for s in sequences}


# ---------------------------------------------------------------------------
# alignments and UTD pairs

def load_alignments(path):
    """Read ``utterance_id word start end`` lines (times in seconds)."""
    entries = []
    last_end = {}
    for lineno, line in _content_lines(path):
        fields = line.split()
        if len(fields) != 4:
            raise FormatError(f"expected 4 fields, got {len(fields)}", path, lineno)
        utt, word, start, end = fields
        start = _parse_float(start, path, lineno, "start time")
        end = _parse_float(end, path, lineno, "end time")
        if start < 0 or start >= end:
            raise FormatError(f"need 0 <= start < end, got {start} and {end}", path, lineno)
        if utt in last_end and start < last_end[utt]:
            raise FormatError(f"word overlaps the previous entry of {utt!r}", path, lineno)
        last_end[utt] = max(end, last_end.get(utt, end))
        entries.append(WordAlignmentEntry(utt, normalize_word(word), start, end))
    return entries


def write_alignments(entries, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.utterance_id} {e.word} {e.start!r} {e.end!r}\n")


def load_utd_pairs(path, manifest):
    """Read ``utt_a start_a end_a utt_b start_b end_b [score]`` lines.

    Both utterances must be present in `manifest`. Times stay in seconds.
    """
    pairs = []
    for lineno, line in _content_lines(path):
        fields = line.split()
        if len(fields) not in (6, 7):
            raise FormatError(f"expected 6 or 7 fields, got {len(fields)}", path, lineno)
        utt_a, utt_b = fields[0], fields[3]
        for utt in (utt_a, utt_b):
            if utt not in manifest:
                raise FormatError(f"unknown utterance {utt!r}", path, lineno)
        sa, ea, sb, eb = (_parse_float(fields[k], path, lineno, "time") for k in (1, 2, 4, 5))
        if not (sa < ea and sb < eb):
            raise FormatError("fragment start must precede its end", path, lineno)
        score = _parse_float(fields[6], path, lineno, "score") if len(fields) == 7 else 0.0
        pairs.append(UtdPairEntry(utt_a, sa, ea, utt_b, sb, eb, score))
    return pairs


def write_utd_pairs(pairs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.utt_a} {p.start_a!r} {p.end_a!r} "
                     f"{p.utt_b} {p.start_b!r} {p.end_b!r} {p.score!r}\n")


# ---------------------------------------------------------------------------
# text matrices (external features)

def write_text_matrices(matrices, path):
    """Write ``{id: matrix}`` as text::

        utt1  [
          0.1 0.2 0.3
          0.4 0.5 0.6 ]

    Values are written with 9 significant digits so float32 data survives
    the round trip exactly.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for key, mat in matrices.items():
            mat = np.asarray(mat, dtype=np.float32)
            fh.write(f"{key}  [\n")
            for r, row in enumerate(mat):
                text = " ".join(f"{float(v):.9g}" for v in row)
                fh.write(f"  {text}")
                fh.write(" ]\n" if r == len(mat) - 1 else "\n")


def read_text_matrices(path):
    """Parse the bracketed text-matrix format; returns ``{id: float64 matrix}``."""
    out = {}
    current = None
    rows = []
    start_line = None
    for lineno, line in _content_lines(path):
        tokens = line.split()
        if current is None:
            if len(tokens) < 2 or tokens[1] != "[":
                raise FormatError("expected '<id> [' to open a matrix", path, lineno)
            current, start_line = tokens[0], lineno
            if current in out:
                raise FormatError(f"duplicate matrix id {current!r}", path, lineno)
            tokens = tokens[2:]
            rows = []
            if not tokens:
                continue
        closing = tokens and tokens[-1] == "]"
        if closing:
            tokens = tokens[:-1]
        if tokens:
            row = [_parse_float(t, path, lineno, "value") for t in tokens]
            if rows and len(row) != len(rows[0]):
                raise FormatError(
                    f"row has {len(row)} values, expected {len(rows[0])}", path, lineno)
            rows.append(row)
        if closing:
            if not rows:
                raise FormatError(f"matrix {current!r} is empty", path, lineno)
            out[current] = np.array(rows, dtype=np.float64)
            current = None
    if current is not None:
        raise FormatError(f"matrix {current!r} opened here is never closed", path, start_line)
    return out


def import_text_features(path, frame_shift=0.010, frame_length=0.025, manifest=None):
    """Convert an external text-matrix feature file into FeatureSequences.

    With a manifest, every matrix id must name a known utterance and the
    output follows manifest order.
    """
    mats = read_text_matrices(path)
    keys = list(mats)
    if manifest is not None:
        unknown = [k for k in keys if k not in manifest]
        if unknown:
            raise ZrkitError(f"features for unknown utterances: {unknown[:5]}")
        keys = [e.utterance_id for e in manifest if e.utterance_id in mats]
    return [FeatureSequence(k, mats[k], frame_shift, frame_length) for k in keys]
