"""
Estimating vocal tract length warps
===================================

Speakers in the audio corpus are generated with known warp factors. A UBM
is trained on the pooled features and every speaker then picks the warp
whose re-extracted features the UBM likes best. A couple of retraining
passes let the UBM forget the original speaker differences.
"""

import tempfile

from zrkit import evaluation, frontend, pairs, synthcorpus, vtln

work = tempfile.mkdtemp(prefix="zrkit-vtln-")
cfg = synthcorpus.SynthConfig(mode="audio", n_speakers=6, tokens_per_word=12)
corpus = synthcorpus.generate(cfg, work)

vcfg = vtln.VtlnConfig(n_components=32)
ubm, warps = vtln.train_vtln(corpus.manifest, vtln_config=vcfg, seed=0)
print("UBM:", ubm.n_components, "components, EM log-likelihoods",
      [round(v) for v in ubm.log_likelihoods[:3]], "...")
for spk in corpus.manifest.speakers():
    print(f"{spk}: true {corpus.true_warps[spk]:.2f}  estimated {warps[spk]:.2f}")

# does warping help the same-different task?
evp, _ = pairs.make_eval_pairs(pairs.select_segments(corpus.alignments, corpus.manifest))
raw = frontend.extract_corpus(corpus.manifest, frontend.FrontendConfig())
warped = vtln.apply_vtln(corpus.manifest, warps)
print(f"AP raw  {evaluation.evaluate(raw, evp).average_precision:.4f}")
print(f"AP VTLN {evaluation.evaluate(warped, evp).average_precision:.4f}")
