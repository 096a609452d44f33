"""
Evaluating features computed elsewhere
======================================

Features from another toolkit (bottleneck features, say) can be evaluated
without touching the front end: write them as text matrices, import, and
score. The result is identical to scoring the same numbers natively.
"""

import os
import tempfile

from zrkit import corpus_io, evaluation, pairs, synthcorpus

work = tempfile.mkdtemp(prefix="zrkit-ext-")
corpus = synthcorpus.generate(synthcorpus.SynthConfig(n_words=4))
evp, _ = pairs.make_eval_pairs(pairs.select_segments(corpus.alignments, corpus.manifest))

# pretend these came from an external system
text_path = os.path.join(work, "bnf.txt")
corpus_io.write_text_matrices({s.utterance_id: s.frames for s in corpus.archive}, text_path)
with open(text_path) as fh:
    print("".join(fh.readlines()[:3]), "...")

imported = corpus_io.import_text_features(text_path, manifest=corpus.manifest)
native_archive = [s for s in corpus.archive]
zrfa = os.path.join(work, "native.zrfa")
corpus_io.write_feature_archive(native_archive, zrfa)
native = corpus_io.read_feature_archive(zrfa)

a = evaluation.evaluate(native, evp).average_precision
b = evaluation.evaluate(imported, evp).average_precision
print(f"native AP {a!r}\nimported AP {b!r}\nidentical: {a == b}")
