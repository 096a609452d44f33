import math

import numpy as np
import pytest

from zrkit import frontend, synthcorpus, vtln
from zrkit.errors import FormatError, ZrkitError
from zrkit.vtln import DiagonalGmm, VtlnConfig

from oracles import gmm_density_naive


def three_blobs(seed, n=600, d=2):
    rng = np.random.default_rng(seed)
    centers = np.array([[-6.0] * d, [0.0] * d, [6.0] * d])
    labels = rng.integers(3, size=n)
    return centers[labels] + rng.normal(size=(n, d)) * rng.uniform(0.5, 1.5, size=3)[labels, None]


def random_gmm(rng, k=3, d=4):
    w = rng.uniform(0.2, 1.0, size=k)
    return DiagonalGmm(w / w.sum(), rng.normal(size=(k, d)), rng.uniform(0.5, 2.0, size=(k, d)))


class TestLikelihood:
    def test_standard_normal_mode(self):
        g = DiagonalGmm(np.ones(1), np.zeros((1, 1)), np.ones((1, 1)))
        assert vtln.average_log_likelihood(g, np.zeros((1, 1))) == pytest.approx(
            -0.5 * math.log(2 * math.pi), abs=1e-15)

    def test_duplication_invariance(self):
        rng = np.random.default_rng(0)
        g, x = random_gmm(rng), rng.normal(size=(50, 4))
        assert vtln.average_log_likelihood(g, np.vstack([x, x])) == pytest.approx(
            vtln.average_log_likelihood(g, x), rel=1e-14)

    def test_matches_naive_density(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            g = random_gmm(rng)
            x = rng.normal(size=(10, 4))
            got = vtln.frame_log_likelihoods(g, x)
            want = np.log([gmm_density_naive(g.weights, g.means, g.variances, row) for row in x])
            np.testing.assert_allclose(got, want, rtol=1e-9)

    def test_pure(self):
        rng = np.random.default_rng(2)
        g, x = random_gmm(rng), rng.normal(size=(30, 4))
        a = vtln.frame_log_likelihoods(g, x)
        b = vtln.frame_log_likelihoods(g, x)
        assert a.tobytes() == b.tobytes()

    def test_dim_mismatch(self):
        g = random_gmm(np.random.default_rng(0))
        with pytest.raises(ZrkitError):
            vtln.frame_log_likelihoods(g, np.zeros((3, 2)))


class TestTraining:
    def test_single_component_closed_form(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(200, 3)) * [1.0, 2.0, 0.5] + [1.0, -2.0, 0.0]
        g = vtln.train_ubm(x, VtlnConfig(n_components=1), seed=0)
        assert g.weights.tolist() == [1.0]
        np.testing.assert_allclose(g.means[0], x.mean(axis=0), rtol=1e-12)
        floor = 1e-3 * x.var(axis=0)
        np.testing.assert_allclose(g.variances[0], np.maximum(x.var(axis=0), floor), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_em_monotone(self, seed):
        g = vtln.train_ubm(three_blobs(seed), VtlnConfig(n_components=3), seed=seed)
        ll = np.array(g.log_likelihoods)
        assert len(ll) == 11
        assert np.all(np.diff(ll) >= -1e-8 * np.abs(ll[:-1]))

    def test_simplex_and_floor(self):
        x = three_blobs(0, d=3)
        g = vtln.train_ubm(x, VtlnConfig(n_components=5), seed=0)
        assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(g.weights > 0)
        assert np.all(g.variances >= g.variance_floor[None, :])

    def test_identical_frames_hit_floor(self):
        x = np.ones((100, 2))
        g = vtln.train_ubm(x, VtlnConfig(n_components=2), seed=0)
        np.testing.assert_array_equal(g.variances, np.full((2, 2), 1e-8))

    def test_too_few_frames(self):
        with pytest.raises(ZrkitError, match="too few"):
            vtln.train_ubm(np.zeros((50, 2)), VtlnConfig(n_components=8))

    def test_deterministic_and_jobs_independent(self):
        x = np.tile(three_blobs(4, n=700), (4, 1))
        a = vtln.train_ubm(x, VtlnConfig(n_components=3), seed=1, jobs=1)
        b = vtln.train_ubm(x, VtlnConfig(n_components=3), seed=1, jobs=3)
        assert a.means.tobytes() == b.means.tobytes()
        assert a.log_likelihoods == b.log_likelihoods

    def test_bad_config(self):
        with pytest.raises(ZrkitError):
            VtlnConfig(warp_grid=(0.9, 1.1))
        with pytest.raises(ZrkitError):
            VtlnConfig(warp_grid=(1.0, 0.9))


class TestSelection:
    def test_ties_prefer_unity(self):
        grid = (0.9, 0.95, 1.0, 1.05, 1.1)
        assert vtln._select_warp([1, 1, 1, 1, 1], grid) == 1.0
        assert vtln._select_warp([2, 1, 0, 1, 2], grid) == 0.9
        assert vtln._select_warp([0, 2, 0, 2, 0], grid) == 0.95

    def test_recenter(self):
        grid = vtln.default_warp_grid()
        shifted = {"a": 0.98, "b": 1.08, "c": 1.2}
        assert vtln.recenter_warps(shifted, grid) == {"a": 0.9, "b": 1.0, "c": 1.1}
        balanced = {"a": 0.9, "b": 1.0, "c": 1.1}
        assert vtln.recenter_warps(balanced, grid) == balanced
        assert vtln.recenter_warps({"a": 1.1}, grid) == {"a": 1.0}
        assert vtln.recenter_warps({}, grid) == {}

    def test_default_grid(self):
        grid = vtln.default_warp_grid()
        assert len(grid) == 21 and grid[0] == 0.8 and grid[-1] == 1.2 and 1.0 in grid


@pytest.fixture(scope="module")
def small_audio(tmp_path_factory):
    out = tmp_path_factory.mktemp("audio")
    cfg = synthcorpus.SynthConfig(mode="audio", n_speakers=2, n_words=3, tokens_per_word=4,
                                  warp_set=(0.9, 1.1), seed=5)
    return synthcorpus.generate(cfg, str(out))


class TestWarps:
    def test_singleton_grid(self, small_audio):
        m = small_audio.manifest
        arch = frontend.extract_corpus(m, frontend.FrontendConfig())
        cfg = VtlnConfig(n_components=4, warp_grid=(1.0,))
        ubm = vtln.train_ubm(np.concatenate([s.frames for s in arch]), cfg)
        warps = vtln.estimate_warps(m, ubm, vtln_config=cfg)
        assert warps == {s: 1.0 for s in m.speakers()}

    def test_self_consistency(self, tmp_path):
        # a lone unwarped speaker scored against a UBM of its own features
        cfg = synthcorpus.SynthConfig(mode="audio", n_speakers=1, n_words=4, tokens_per_word=4,
                                      warp_set=(1.0,), seed=2)
        corpus = synthcorpus.generate(cfg, str(tmp_path))
        arch = frontend.extract_corpus(corpus.manifest, frontend.FrontendConfig())
        vcfg = VtlnConfig(n_components=8)
        ubm = vtln.train_ubm(np.concatenate([s.frames for s in arch]), vcfg)
        assert vtln.estimate_warps(corpus.manifest, ubm, vtln_config=vcfg) == {"spk00": 1.0}

    def test_order_invariance(self, small_audio):
        from zrkit.corpus_io import UtteranceManifest
        m = small_audio.manifest
        arch = frontend.extract_corpus(m, frontend.FrontendConfig())
        cfg = VtlnConfig(n_components=4, warp_grid=(0.9, 1.0, 1.1))
        ubm = vtln.train_ubm(np.concatenate([s.frames for s in arch]), cfg)
        a = vtln.estimate_warps(m, ubm, vtln_config=cfg)
        b = vtln.estimate_warps(UtteranceManifest(m.entries[::-1]), ubm, vtln_config=cfg,
                                jobs=2)
        assert a == b

    def test_apply(self, small_audio):
        m = small_audio.manifest
        base = frontend.extract_corpus(m, frontend.FrontendConfig())
        same = vtln.apply_vtln(m, {s: 1.0 for s in m.speakers()})
        for x, y in zip(base, same):
            assert x.frames.tobytes() == y.frames.tobytes()
        warped = vtln.apply_vtln(m, {"spk00": 0.9, "spk01": 1.1})
        assert all(not np.array_equal(x.frames, y.frames) for x, y in zip(base, warped))


class TestSerialization:
    def test_warps_round_trip(self, tmp_path):
        w = {"a": 0.9, "b": 1.02}
        vtln.write_warps(w, tmp_path / "w.tsv")
        assert vtln.read_warps(tmp_path / "w.tsv", vtln.default_warp_grid()) == w

    def test_off_grid_warp(self, tmp_path):
        (tmp_path / "w.tsv").write_text("a\t0.91\n")
        with pytest.raises(FormatError, match="grid"):
            vtln.read_warps(tmp_path / "w.tsv", vtln.default_warp_grid())

    def test_gmm_round_trip(self, tmp_path):
        g = vtln.train_ubm(three_blobs(0), VtlnConfig(n_components=3))
        vtln.write_gmm(g, tmp_path / "g.zrfa")
        back = vtln.read_gmm(tmp_path / "g.zrfa")
        np.testing.assert_allclose(back.means, g.means, rtol=1e-6)
        assert back.weights.sum() == pytest.approx(1.0)
