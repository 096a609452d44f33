"""
MFCC features from synthetic audio
==================================

Generate a few seconds of synthetic speech, run the front end and look at
what comes out: 39 dimensions per 10 ms frame, mean-normalized per speaker.
"""

import tempfile

import numpy as np

from zrkit import corpus_io, frontend, synthcorpus

work = tempfile.mkdtemp(prefix="zrkit-mfcc-")

# a tiny corpus: 2 words, 4 tokens each, 2 speakers, one WAV per token
cfg = synthcorpus.SynthConfig(mode="audio", n_words=2, tokens_per_word=4, n_speakers=2)
corpus = synthcorpus.generate(cfg, work)
entry = corpus.manifest.entries[0]
samples, rate = corpus_io.read_wav(entry.audio_path)
print(f"{entry.utterance_id}: {len(samples) / rate:.2f}s at {rate} Hz")

# one utterance by hand
fe = frontend.FrontendConfig()
frames = frontend.frame_and_window(samples, fe)
spectra = frontend.power_spectrum(frames, fe.fft_size)
print("frames", frames.shape, "-> power spectra", spectra.shape)

feats = frontend.extract_features(samples, fe, utterance_id=entry.utterance_id)
print("MFCC + deltas:", feats.frames.shape)

# the whole corpus, with per-speaker CMN
archive = frontend.extract_corpus(corpus.manifest, fe)
for spk in corpus.manifest.speakers():
    mats = [s.frames for s in archive if corpus.manifest.speaker_of(s.utterance_id) == spk]
    print(spk, "max |mean| after CMN:", np.abs(np.concatenate(mats).mean(axis=0)).max())

# VTLN warps the filterbank axis; alpha > 1 moves the filters up in Hz
for alpha in (0.9, 1.0, 1.1):
    fb = frontend.build_filterbank(fe, alpha)
    print(f"alpha {alpha}: first five filter peaks (Hz)", np.round(fb.center_freqs[:5]))
