"""
Aligning two word tokens with DTW
=================================

The same word spoken twice differs in timing. DTW finds the cheapest
monotone alignment under the cosine distance; its length-normalized cost is
what the same-different evaluation ranks.
"""

import numpy as np

from zrkit import alignment, synthcorpus

corpus = synthcorpus.generate(synthcorpus.SynthConfig(n_words=2, tokens_per_word=6,
                                                      n_speakers=2))
tokens = {}
for seq in corpus.archive:
    spk = corpus.manifest.speaker_of(seq.utterance_id)
    tokens.setdefault((corpus.word_of[seq.utterance_id], spk), []).append(seq)
(w1, w2), (s1, s2) = sorted({w for w, _ in tokens}), sorted({s for _, s in tokens})
ref = tokens[w1, s1][0]

# same speaker, same word: cheap. Another speaker saying the same word costs
# more, which is exactly the gap speaker normalization has to close.
for label, other in [(f"{w1}/{s1}", tokens[w1, s1][1]), (f"{w1}/{s2}", tokens[w1, s2][0]),
                     (f"{w2}/{s1}", tokens[w2, s1][0]), (f"{w2}/{s2}", tokens[w2, s2][0])]:
    print(f"{w1}/{s1} vs {label}: {alignment.dtw(ref, other).normalized_cost:.4f}")

# the path pairs every frame of one token with one or more of the other
res = alignment.dtw(ref, tokens[w1, s1][1], with_path=True)
path = np.array(res.path)
print("token lengths", ref.n_frames, tokens[w1, s1][1].n_frames, "path length", res.path_length)
print("first steps", res.path[:4], "... last", res.path[-1])
print("frames used more than once:", int(np.sum(np.bincount(path[:, 0]) > 1)),
      "and", int(np.sum(np.bincount(path[:, 1]) > 1)))

# a Sakoe-Chiba band only removes paths, so the cost can only go up
other = tokens[w1, s2][0]
for band in (1.0, 0.1, 0.02):
    print(f"band {band}: {alignment.dtw_cost_banded(ref, other, band):.4f}")
