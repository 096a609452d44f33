"""
MFCC front end with optional VTLN frequency warping.

The stack is: framing with preemphasis and a Hamming window, power
spectrum, (warped) mel filterbank, log, orthonormal DCT-II, deltas and
delta-deltas, and finally per-speaker cepstral mean normalization.
"""

from dataclasses import dataclass

import numpy as np

from . import corpus_io
from .corpus_io import FeatureSequence
from .errors import ZrkitError
from .parallel import map_ordered

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: int = 16000
    frame_length: float = 0.025
    frame_shift: float = 0.010
    preemphasis: float = 0.97
    fft_size: int = 512
    n_mels: int = 23
    n_ceps: int = 13
    low_freq: float = 20.0
    high_freq: float = 7800.0
    warp_low_cutoff_fraction: float = 0.7

    def __post_init__(self):
        if not 0 < self.low_freq < self.high_freq <= self.sample_rate / 2:
            raise ZrkitError(
                f"need 0 < low_freq < high_freq <= sample_rate/2, got "
                f"{self.low_freq}, {self.high_freq}, {self.sample_rate}")
        if self.fft_size < self.frame_size:
            raise ZrkitError(f"fft_size {self.fft_size} is shorter than a frame")
        if not 1 <= self.n_ceps <= self.n_mels:
            raise ZrkitError("need 1 <= n_ceps <= n_mels")
        if not self.frame_shift > 0 or not self.frame_length > 0:
            raise ZrkitError("frame length and shift must be positive")
        if not 0 < self.warp_low_cutoff_fraction < 1:
            raise ZrkitError("warp_low_cutoff_fraction must lie in (0, 1)")

    @property
    def frame_size(self):
        return int(round(self.frame_length * self.sample_rate))

    @property
    def shift_size(self):
        return int(round(self.frame_shift * self.sample_rate))


@dataclass
class MelFilterbank:
    warp_factor: float
    filters: np.ndarray        # n_mels x (fft_size // 2 + 1)
    center_freqs: np.ndarray   # physical Hz of each filter peak


def frame_and_window(samples, config):
    """Slice `samples` into preemphasized, Hamming-windowed frames."""
    samples = np.asarray(samples, dtype=np.float64)
    size, shift = config.frame_size, config.shift_size
    if len(samples) < size:
        raise ZrkitError(f"signal of {len(samples)} samples is shorter than one frame ({size})")
    n_frames = 1 + (len(samples) - size) // shift
    idx = np.arange(size)[None, :] + shift * np.arange(n_frames)[:, None]
    frames = samples[idx]
    # first sample of each frame is preemphasized against itself
    prev = np.concatenate([frames[:, :1], frames[:, :-1]], axis=1)
    frames = frames - config.preemphasis * prev
    return frames * np.hamming(size)[None, :]


def power_spectrum(frames, fft_size):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.shape[1] > fft_size:
        raise ZrkitError(f"frame width {frames.shape[1]} exceeds fft_size {fft_size}")
    spec = np.fft.rfft(frames, n=fft_size, axis=1)
    return spec.real ** 2 + spec.imag ** 2


def mel_scale(f):
    return 1127.0 * np.log1p(np.asarray(f, dtype=np.float64) / 700.0)


def inverse_mel_scale(m):
    return 700.0 * np.expm1(np.asarray(m, dtype=np.float64) / 1127.0)


def warp_frequency(f, warp_factor, config):
    """Piecewise-linear VTLN warp of physical frequencies `f` (Hz).

    ``f / alpha`` up to the knee, then a straight line to
    ``(high_freq, high_freq)``. For ``alpha < 1`` the knee is pulled down by
    ``alpha`` so the upper segment is not squeezed as hard.
    """
    f = np.asarray(f, dtype=np.float64)
    alpha = float(warp_factor)
    if alpha == 1.0:
        return f.copy()
    high = config.high_freq
    knee = config.warp_low_cutoff_fraction * high * min(1.0, alpha)
    knee_out = knee / alpha
    slope = (high - knee_out) / (high - knee)
    return np.where(f <= knee, f / alpha, knee_out + slope * (f - knee))


def build_filterbank(config, warp_factor=1.0):
    """Triangular mel filterbank, optionally on a VTLN-warped frequency axis."""
    if not 0.5 <= warp_factor <= 2.0:
        raise ZrkitError(f"warp factor {warp_factor} outside [0.5, 2.0]")
    n_bins = config.fft_size // 2 + 1
    bin_freqs = np.arange(n_bins) * config.sample_rate / config.fft_size
    bin_mels = mel_scale(warp_frequency(bin_freqs, warp_factor, config))
    edges = np.linspace(mel_scale(config.low_freq), mel_scale(config.high_freq),
                        config.n_mels + 2)
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_mels[None, :] - left) / (center - left)
    down = (right - bin_mels[None, :]) / (right - center)
    filters = np.maximum(0.0, np.minimum(up, down))
    centers_warped = inverse_mel_scale(edges[1:-1])
    grid = np.linspace(0.0, config.sample_rate / 2, 8 * n_bins)
    centers = np.interp(centers_warped, warp_frequency(grid, warp_factor, config), grid)
    return MelFilterbank(float(warp_factor), filters, centers)


def dct_matrix(n_out, n_in):
    """Rows of the orthonormal DCT-II of length `n_in`, first `n_out` of them."""
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    m = np.cos(np.pi * k * (2 * n + 1) / (2 * n_in)) * np.sqrt(2.0 / n_in)
    m[0] /= np.sqrt(2.0)
    return m


def mfcc(power_spectra, filterbank, config, utterance_id=""):
    """Log mel energies followed by DCT-II; returns a FeatureSequence of n_ceps."""
    energies = power_spectra @ filterbank.filters.T
    log_e = np.log(np.maximum(energies, LOG_FLOOR))
    ceps = log_e @ dct_matrix(config.n_ceps, config.n_mels).T
    return FeatureSequence(utterance_id, ceps, config.frame_shift, config.frame_length)


def _delta(x, window):
    T = len(x)
    denom = 2.0 * sum(k * k for k in range(1, window + 1))
    padded = np.concatenate([np.repeat(x[:1], window, axis=0), x,
                             np.repeat(x[-1:], window, axis=0)])
    out = np.zeros_like(x)
    for k in range(1, window + 1):
        out += k * (padded[window + k:window + k + T] - padded[window - k:window - k + T])
    return out / denom


def add_deltas(features, window=2):
    """Append deltas and delta-deltas (edge frames replicated)."""
    x = np.asarray(features.frames, dtype=np.float64)
    d = _delta(x, window)
    dd = _delta(d, window)
    return FeatureSequence(features.utterance_id, np.hstack([x, d, dd]),
                           features.frame_shift, features.frame_length)


def cmn_per_speaker(archive, manifest):
    """Subtract each speaker's mean frame (pooled over their utterances).

    Means are accumulated in manifest order so the result does not depend on
    how the archive was produced.
    """
    by_id = corpus_io.archive_index(archive)
    for seq in archive:
        if seq.utterance_id not in manifest:
            raise ZrkitError(f"utterance {seq.utterance_id!r} has no speaker in the manifest")
    means = {}
    for spk in manifest.speakers():
        mats = [np.asarray(by_id[u].frames, dtype=np.float64)
                for u in manifest.utterances_of(spk) if u in by_id]
        if mats:
            means[spk] = np.concatenate(mats).mean(axis=0)
    return [FeatureSequence(s.utterance_id,
                            np.asarray(s.frames, dtype=np.float64)
                            - means[manifest.speaker_of(s.utterance_id)],
                            s.frame_shift, s.frame_length)
            for s in archive]


def spectra_from_samples(samples, config):
    return power_spectrum(frame_and_window(samples, config), config.fft_size)


def features_from_spectra(spectra, config, filterbank, utterance_id=""):
    """MFCC + deltas (no normalization) from precomputed power spectra."""
    return add_deltas(mfcc(spectra, filterbank, config, utterance_id))


def extract_features(samples, config, warp_factor=1.0, utterance_id=""):
    """MFCC+delta+delta-delta for one utterance, without CMN."""
    fb = build_filterbank(config, warp_factor)
    return features_from_spectra(spectra_from_samples(samples, config), config, fb, utterance_id)


def load_samples(entry, config):
    samples, rate = corpus_io.read_wav(entry.audio_path)
    if rate != config.sample_rate:
        raise ZrkitError(
            f"{entry.audio_path}: sample rate {rate} differs from configured {config.sample_rate}")
    return samples


def extract_corpus(manifest, config, warps=None, cmn=True, jobs=1):
    """Features for every manifest utterance, optionally speaker-warped, with CMN.

    Parameters
    ----------
    warps : dict speaker_id -> alpha, optional
        missing speakers are an error when given; ``None`` means alpha = 1.
    """
    if warps is not None:
        missing = [s for s in manifest.speakers() if s not in warps]
        if missing:
            raise ZrkitError(f"no warp factor for speakers {missing}")
    alphas = [1.0 if warps is None else float(warps[e.speaker_id]) for e in manifest]
    banks = {a: build_filterbank(config, a) for a in sorted(set(alphas))}

    def work(item):
        entry, alpha = item
        spectra = spectra_from_samples(load_samples(entry, config), config)
        return features_from_spectra(spectra, config, banks[alpha], entry.utterance_id)

    archive = map_ordered(work, list(zip(manifest.entries, alphas)), jobs)
    return cmn_per_speaker(archive, manifest) if cmn else archive
