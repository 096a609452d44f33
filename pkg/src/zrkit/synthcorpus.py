"""
Seeded synthetic mini-corpora.

A small phone inventory is drawn first and every word type is spelled as a
fixed phone sequence. A token walks through its word's phone targets with
linear transitions; targets are perturbed per token (`token_variation`) and
phone durations jitter (`tempo_jitter`).

In ``feature`` mode the targets live directly in feature space and every
speaker applies a fixed small rotation plus an offset, then noise is added.
In ``audio`` mode the targets are three formants and their amplitudes,
rendered as a harmonic source. A speaker with warp factor ``alpha`` sees
its spectral envelope through the piecewise-linear warp the front end
uses; speakers also differ in pitch, spectral tilt and a small per-formant
scale whose spread follows `speaker_offset_scale`. True warps cycle
through `warp_set` in speaker order.

Tokens of a word are assigned to speakers round-robin, one token per
utterance.
"""

import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import corpus_io
from .corpus_io import (FeatureSequence, ManifestEntry, UtteranceManifest,
                        WordAlignmentEntry)
from .errors import ZrkitError
from .frontend import FrontendConfig, warp_frequency

_ONSETS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class SynthConfig:
    n_words: int = 8
    tokens_per_word: int = 12
    n_speakers: int = 6
    feature_dim: int = 13
    mean_token_frames: int = 60
    speaker_offset_scale: float = 1.5
    speaker_rotation_angle_scale: float = 0.3
    noise_scale: float = 0.1
    tempo_jitter: float = 0.15
    seed: int = 0
    mode: str = "feature"
    warp_set: tuple = (0.90, 1.00, 1.10)
    spectral_tilt_scale: float = 1.0
    token_variation: float = 0.4
    n_phones: int = 8
    phones_per_word: int = 4
    margin_seconds: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "warp_set", tuple(float(a) for a in self.warp_set))
        for name in ("n_words", "tokens_per_word", "n_speakers", "feature_dim",
                     "mean_token_frames", "n_phones", "phones_per_word"):
            if getattr(self, name) < 1:
                raise ZrkitError(f"{name} must be >= 1")
        for name in ("speaker_offset_scale", "speaker_rotation_angle_scale", "noise_scale",
                     "tempo_jitter", "spectral_tilt_scale", "margin_seconds",
                     "token_variation"):
            if getattr(self, name) < 0:
                raise ZrkitError(f"{name} must be >= 0")
        if self.mode not in ("feature", "audio"):
            raise ZrkitError(f"mode must be 'feature' or 'audio', got {self.mode!r}")
        if not self.warp_set:
            raise ZrkitError("warp_set must not be empty")


@dataclass
class SynthCorpus:
    config: SynthConfig
    manifest: UtteranceManifest
    alignments: list
    word_of: dict                   # utterance_id -> word
    archive: list = None            # feature mode only
    true_warps: dict = field(default_factory=dict)


def word_names(n, rng):
    """`n` distinct pronounceable pseudo-words of at least five letters."""
    names = []
    seen = set()
    while len(names) < n:
        syll = [rng.choice(list(_ONSETS)) + rng.choice(list(_VOWELS)) for _ in range(3)]
        w = "".join(syll)
        if w not in seen:
            seen.add(w)
            names.append(w)
    return names


def speaker_ids(n):
    return [f"spk{k:02d}" for k in range(n)]


def assign_speakers(config):
    """Speaker index of token ``t`` of word ``w``: ``t mod n_speakers``."""
    return [[t % config.n_speakers for t in range(config.tokens_per_word)]
            for _ in range(config.n_words)]


def expected_counts(config):
    """Closed-form category counts of the all-pairs evaluation set."""
    per_spk = [config.tokens_per_word // config.n_speakers
               + (1 if s < config.tokens_per_word % config.n_speakers else 0)
               for s in range(config.n_speakers)]
    sw = config.n_words * math.comb(config.tokens_per_word, 2)
    sw_sp = config.n_words * sum(math.comb(c, 2) for c in per_spk)
    n = config.n_words * config.tokens_per_word
    return {"S": math.comb(n, 2), "SW": sw, "SW-SP": sw_sp, "SW-DP": sw - sw_sp,
            "DW": math.comb(n, 2) - sw}


def _random_rotation(rng, dim, angle_scale):
    if angle_scale == 0 or dim < 2:
        return np.eye(dim)
    a = rng.normal(0.0, angle_scale / math.sqrt(dim), size=(dim, dim))
    return expm(a - a.T)


def generate(config=SynthConfig(), out_dir=None):
    """Build a corpus; audio mode writes one WAV per utterance into `out_dir`."""
    rng = np.random.default_rng(config.seed)
    words = word_names(config.n_words, rng)
    spks = speaker_ids(config.n_speakers)
    owners = assign_speakers(config)
    if config.mode == "audio":
        if out_dir is None:
            raise ZrkitError("audio mode needs an output directory for WAV files")
        os.makedirs(out_dir, exist_ok=True)
        return _generate_audio(config, rng, words, spks, owners, out_dir)
    return _generate_features(config, rng, words, spks, owners)


def _utterances(config, words, spks, owners):
    counter = itertools.count()
    for w, word in enumerate(words):
        for t in range(config.tokens_per_word):
            spk = spks[owners[w][t]]
            yield f"{spk}_u{next(counter):04d}", spk, word, w


def _spellings(rng, config):
    """Distinct phone sequences, one per word type."""
    out, seen = [], set()
    n_possible = config.n_phones ** config.phones_per_word
    if n_possible < config.n_words:
        raise ZrkitError("phone inventory too small for the requested number of words")
    while len(out) < config.n_words:
        seq = tuple(int(p) for p in rng.integers(config.n_phones, size=config.phones_per_word))
        if seq not in seen:
            seen.add(seq)
            out.append(seq)
    return out


def _token_track(rng, config, inventory, spelling, spread, rate_factor=1.0):
    """Frame trajectory through the phone targets of one token.

    Targets are perturbed per token by `token_variation`, phone durations
    jitter by `tempo_jitter`, and consecutive targets are joined linearly
    between phone centres.
    """
    n_ph = len(spelling)
    base = config.mean_token_frames / n_ph
    durs = np.maximum(2.0, base * (1.0 + config.tempo_jitter * rng.uniform(-1, 1, size=n_ph)))
    targets = inventory[list(spelling)]
    targets = targets + config.token_variation * spread * rng.normal(size=targets.shape)
    n_frames = max(2, int(round(durs.sum() * rate_factor)))
    centres = (np.cumsum(durs) - durs / 2) * rate_factor
    t = np.arange(n_frames) + 0.5
    return np.stack([np.interp(t, centres, targets[:, k]) for k in range(targets.shape[1])], 1)


def _generate_features(config, rng, words, spks, owners):
    d = config.feature_dim
    inventory = rng.normal(0.0, 1.0, size=(config.n_phones, d))
    spellings = _spellings(rng, config)
    rotations = {s: _random_rotation(rng, d, config.speaker_rotation_angle_scale) for s in spks}
    offsets = {s: rng.normal(0.0, 1.0, size=d) * config.speaker_offset_scale for s in spks}
    entries, alignments, archive, word_of = [], [], [], {}
    shift = 0.010
    spread = np.ones(d)
    for utt, spk, word, w in _utterances(config, words, spks, owners):
        x = _token_track(rng, config, inventory, spellings[w], spread)
        x = x @ rotations[spk].T + offsets[spk]
        x = x + config.noise_scale * rng.normal(size=x.shape)
        n = len(x)
        entries.append(ManifestEntry(utt, spk, f"{utt}.wav"))
        alignments.append(WordAlignmentEntry(utt, word, 0.0, round(n * shift, 6)))
        archive.append(FeatureSequence(utt, x, shift, 0.025))
        word_of[utt] = word
    return SynthCorpus(config, UtteranceManifest(entries), alignments, word_of, archive, {})


# formant ranges (Hz) and bandwidths for the canonical (alpha = 1) speaker
_FORMANT_RANGES = ((300.0, 850.0), (900.0, 2300.0), (2300.0, 3300.0))
_FORMANT_BW = (80.0, 120.0, 160.0)
_ENV_RATE = 200.0  # envelope frames per second


def _audio_inventory(rng, n_phones):
    """Per phone: three formant frequencies and three log amplitudes."""
    freqs = np.stack([rng.uniform(lo, hi, size=n_phones) for lo, hi in _FORMANT_RANGES], 1)
    amps = rng.normal(0.0, 0.6, size=(n_phones, 3))
    return np.hstack([freqs, amps])


def _log_envelope(freqs, track):
    """Log amplitude at `freqs` (n_t x n_h) for a formant track (n_t x 6)."""
    env = np.full(freqs.shape, -3.0)
    for k in range(3):
        env = np.logaddexp(env, 2.5 + track[:, 3 + k:4 + k]
                           - 0.5 * ((freqs - track[:, k:k + 1]) / _FORMANT_BW[k]) ** 2)
    return env


def _synthesize_token(rng, fe, track, alpha, f0, tilt, formant_scale):
    """Harmonic source shaped by a formant track sampled at _ENV_RATE."""
    rate = fe.sample_rate
    n_env = len(track)
    n_samples = int(round((n_env - 1) * rate / _ENV_RATE))
    t = np.arange(n_samples) / rate
    t_env = np.arange(n_env) / _ENV_RATE
    track = track.copy()
    track[:, :3] *= formant_scale[None, :]
    f0_contour = f0 * (1.0 + 0.05 * np.sin(np.pi * np.linspace(0, 1, n_env)))
    n_harm = int(fe.high_freq // (f0 * 0.95))
    hf = f0_contour[:, None] * np.arange(1, n_harm + 1)[None, :]
    # physical harmonic frequency -> canonical axis of an alpha = 1 speaker
    log_amp = _log_envelope(warp_frequency(hf, alpha, fe), track)
    log_amp += tilt * (hf / fe.high_freq)
    amp = np.exp(log_amp) * (hf < fe.high_freq)
    phase0 = np.cumsum(2 * np.pi * np.interp(t, t_env, f0_contour) / rate)
    phases = rng.uniform(0, 2 * np.pi, size=n_harm)
    sig = np.zeros(n_samples)
    for k in range(n_harm):
        sig += np.interp(t, t_env, amp[:, k]) * np.sin((k + 1) * phase0 + phases[k])
    return sig


def _generate_audio(config, rng, words, spks, owners, out_dir):
    fe = FrontendConfig()
    rate = fe.sample_rate
    inventory = _audio_inventory(rng, config.n_phones)
    spellings = _spellings(rng, config)
    warps = {s: config.warp_set[k % len(config.warp_set)] for k, s in enumerate(spks)}
    pitch = {s: rng.uniform(100.0, 150.0) for s in spks}
    tilt = {s: rng.normal(0.0, config.spectral_tilt_scale) for s in spks}
    fscale = {s: np.exp(rng.normal(0.0, 0.01, size=3) * config.speaker_offset_scale)
              for s in spks}
    margin = int(round(config.margin_seconds * rate))
    frames_per_env = _ENV_RATE * fe.frame_shift
    spread = np.array([300.0, 500.0, 400.0, 0.5, 0.5, 0.5])
    entries, alignments, word_of = [], [], {}
    for utt, spk, word, w in _utterances(config, words, spks, owners):
        track = _token_track(rng, config, inventory, spellings[w], spread, frames_per_env)
        token = _synthesize_token(rng, fe, track, warps[spk], pitch[spk], tilt[spk], fscale[spk])
        token /= np.max(np.abs(token)) + 1e-12
        n_word = len(token)
        # raised-cosine ramps avoid clicks at the word boundary
        ramp = min(160, n_word // 4)
        win = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        token[:ramp] *= win
        token[-ramp:] *= win[::-1]
        sig = np.concatenate([np.zeros(margin), 0.5 * token, np.zeros(margin)])
        sig += rng.normal(0.0, 1e-3 + 0.05 * config.noise_scale, size=len(sig))
        path = os.path.join(out_dir, f"{utt}.wav")
        corpus_io.write_wav(path, np.clip(sig, -1.0, 1.0), rate)
        entries.append(ManifestEntry(utt, spk, path))
        start = margin / rate
        alignments.append(WordAlignmentEntry(utt, word, round(start, 6),
                                             round(start + n_word / rate, 6)))
        word_of[utt] = word
    return SynthCorpus(config, UtteranceManifest(entries), alignments, word_of, None, warps)


def write_corpus(corpus, out_dir):
    """Write manifest, alignments, true warps and (feature mode) the archive."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "manifest": os.path.join(out_dir, "manifest.tsv"),
        "alignments": os.path.join(out_dir, "alignments.txt"),
    }
    corpus_io.write_manifest(corpus.manifest, paths["manifest"])
    corpus_io.write_alignments(corpus.alignments, paths["alignments"])
    if corpus.archive is not None:
        paths["features"] = os.path.join(out_dir, "features.zrfa")
        corpus_io.write_feature_archive(corpus.archive, paths["features"])
    if corpus.true_warps:
        from .vtln import write_warps
        paths["true_warps"] = os.path.join(out_dir, "true_warps.tsv")
        write_warps(corpus.true_warps, paths["true_warps"])
    return paths
