import json

import numpy as np
import pytest

from zrkit import cli, corpus_io, pairs
from zrkit.pairs import FramePairSet

SMALL_SYNTH = {"n_words": 3, "tokens_per_word": 4, "n_speakers": 2}
SMALL_CAE = {"hidden_dims": [16, 8], "pretrain_epochs": 1, "finetune_epochs": 2,
             "batch_size": 64}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


class TestResolveConfig:
    def test_empty_file_gives_defaults(self, tmp_path):
        (tmp_path / "c.json").write_text("")
        cfg = cli.resolve_config(str(tmp_path / "c.json"))
        assert cfg.cae.pretrain_lr == 2.5e-4
        assert cfg.cae.finetune_lr == 2.5e-5
        assert cfg.cae.pretrain_epochs == 5 and cfg.cae.finetune_epochs == 60
        assert cfg.vtln.n_components == 32 and cfg.synth.mode == "audio"
        assert cfg.pairs.min_chars == 5 and cfg.pairs.min_duration == 0.5
        assert cfg.seed == 0 and cfg.cae.seed == 0

    def test_flag_beats_file(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"cae": {"batch_size": 128}})
        assert cli.resolve_config(path).cae.batch_size == 128
        assert cli.resolve_config(path, ["cae.batch_size=64"]).cae.batch_size == 64
        assert cli.resolve_config(path, ["batch_size=64"]).cae.batch_size == 64

    def test_flat_keys(self, tmp_path):
        path = write_json(tmp_path / "c.json", {"n_components": 8, "band_fraction": 0.5})
        cfg = cli.resolve_config(path)
        assert cfg.vtln.n_components == 8 and cfg.dtw.band_fraction == 0.5

    @pytest.mark.parametrize("data, name", [
        ({"pretrain_lrr": 1e-3}, "pretrain_lrr"),
        ({"cae": {"pretrain_lrr": 1e-3}}, "pretrain_lrr"),
        ({"caee": {}}, "caee"),
    ])
    def test_unknown_keys(self, tmp_path, data, name):
        with pytest.raises(cli.UsageError, match=name):
            cli.resolve_config(write_json(tmp_path / "c.json", data))

    def test_unknown_override(self):
        with pytest.raises(cli.UsageError, match="nope"):
            cli.resolve_config(None, ["vtln.nope=1"])

    def test_bad_json(self, tmp_path):
        (tmp_path / "c.json").write_text("{")
        with pytest.raises(cli.UsageError, match="JSON"):
            cli.resolve_config(str(tmp_path / "c.json"))

    def test_invalid_value(self):
        with pytest.raises(cli.UsageError, match="cae"):
            cli.resolve_config(None, ["cae.batch_size=0"])

    def test_seed_propagates(self):
        cfg = cli.resolve_config(None, [], seed=7)
        assert cfg.seed == 7 and cfg.cae.seed == 7 and cfg.synth.seed == 7
        cfg = cli.resolve_config(None, ["cae.seed=3"], seed=7)
        assert cfg.cae.seed == 3

    def test_resolved_config_is_explicit(self):
        d = cli.resolve_config().to_dict()
        assert d["cae"]["pretrain_lr"] == 2.5e-4
        assert d["seed"] == 0 and isinstance(d["stages"], list)
        assert len(d["vtln"]["warp_grid"]) == 21

    def test_unknown_stage(self):
        with pytest.raises(cli.UsageError, match="stage"):
            cli.resolve_config(stages=["synth", "dance"])


@pytest.fixture
def feature_corpus(tmp_path):
    out = tmp_path / "corpus"
    assert cli.run(["synth", "--out-dir", str(out), "--set", "synth.mode=feature"]
                   + [f"--set=synth.{k}={v}" for k, v in SMALL_SYNTH.items()]) == 0
    assert cli.run(["pairs-gold", "--alignments", str(out / "alignments.txt"),
                    "--manifest", str(out / "manifest.tsv"), "--out-dir", str(out)]) == 0
    return out


class TestRun:
    def test_eval_smoke(self, feature_corpus, tmp_path):
        report = tmp_path / "report.json"
        code = cli.run(["eval", "--features", str(feature_corpus / "features.zrfa"),
                        "--pairs", str(feature_corpus / "eval_pairs.tsv"),
                        "--out", str(report), "--curve", str(tmp_path / "curve.csv")])
        assert code == 0
        data = json.loads(report.read_text())
        assert 0 <= data["ap"] <= 1
        assert data["counts"]["S"] == 66
        echo = json.loads((tmp_path / "eval.config.json").read_text())
        assert echo["seed"] == 0 and echo["config"]["cae"]["pretrain_lr"] == 2.5e-4
        assert (tmp_path / "curve.csv").read_text().startswith("threshold,")

    def test_missing_features(self, feature_corpus, tmp_path, capsys):
        code = cli.run(["eval", "--features", str(tmp_path / "missing.zrfa"),
                        "--pairs", str(feature_corpus / "eval_pairs.tsv"),
                        "--out", str(tmp_path / "r.json")])
        assert code == 2
        assert "missing.zrfa" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert cli.run(["frobnicate"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert cli.run(["eval", "--bogus"]) == 2
        assert "usage" in capsys.readouterr().err

    def test_bad_config_key_exit_code(self, tmp_path, feature_corpus, capsys):
        cfg = write_json(tmp_path / "c.json", {"pretrain_lrr": 1})
        code = cli.run(["eval", "--config", cfg, "--features", "x", "--pairs", "y",
                        "--out", str(tmp_path / "r.json")])
        assert code == 2
        assert "pretrain_lrr" in capsys.readouterr().err

    def test_domain_error(self, feature_corpus, tmp_path, capsys):
        # archive without the utterances the pairs refer to
        corpus_io.write_feature_archive(
            [corpus_io.FeatureSequence("other", np.ones((3, 13)))], tmp_path / "f.zrfa")
        code = cli.run(["eval", "--features", str(tmp_path / "f.zrfa"),
                        "--pairs", str(feature_corpus / "eval_pairs.tsv"),
                        "--out", str(tmp_path / "r.json")])
        assert code == 1
        assert "no features" in capsys.readouterr().err

    def test_import_and_eval(self, feature_corpus, tmp_path):
        archive = corpus_io.read_feature_archive(feature_corpus / "features.zrfa")
        corpus_io.write_text_matrices({s.utterance_id: s.frames for s in archive},
                                      tmp_path / "f.txt")
        assert cli.run(["import-features", "--text", str(tmp_path / "f.txt"),
                        "--out", str(tmp_path / "imp.zrfa"),
                        "--manifest", str(feature_corpus / "manifest.tsv")]) == 0
        back = corpus_io.read_feature_archive(tmp_path / "imp.zrfa")
        assert [s.frames.tobytes() for s in back] == [s.frames.tobytes() for s in archive]

    def test_jobs_from_environment(self, monkeypatch, feature_corpus, tmp_path):
        monkeypatch.setenv("ZRKIT_JOBS", "3")
        out = tmp_path / "r.json"
        assert cli.run(["eval", "--features", str(feature_corpus / "features.zrfa"),
                        "--pairs", str(feature_corpus / "eval_pairs.tsv"),
                        "--out", str(out)]) == 0
        assert json.loads((tmp_path / "eval.config.json").read_text())["jobs"] == 3


def test_frame_pair_container(tmp_path):
    rng = np.random.default_rng(0)
    fp = FramePairSet(rng.normal(size=(10, 3)).astype(np.float32).astype(np.float64),
                      rng.normal(size=(10, 3)).astype(np.float32).astype(np.float64), 0)
    cli.write_frame_pairs(fp, tmp_path / "fp.zrfa")
    back = cli.read_frame_pairs(tmp_path / "fp.zrfa")
    assert np.array_equal(back.inputs, fp.inputs) and np.array_equal(back.targets, fp.targets)


def test_pipeline_end_to_end(tmp_path):
    cfg = {
        "synth": dict(SMALL_SYNTH, mode="audio"),
        "cae": SMALL_CAE,
        "paths": {"work_dir": str(tmp_path / "work")},
        "stages": ["synth", "mfcc", "pairs-gold", "pairs-frames", "cae-pretrain",
                   "cae-train", "cae-encode", "eval"],
    }
    assert cli.run(["pipeline", "--config", write_json(tmp_path / "cfg.json", cfg)]) == 0
    work = tmp_path / "work"
    report = json.loads((work / "report.json").read_text())
    assert report["label"] == "cae" and 0 <= report["ap"] <= 1
    echo = json.loads((work / "pipeline.config.json").read_text())
    assert echo["config"]["stages"] == cfg["stages"]
    assert echo["config"]["cae"]["hidden_dims"] == [16, 8]
    encoded = corpus_io.read_feature_archive(work / "cae_features.zrfa")
    assert encoded[0].dim == 8
    assert len(pairs.read_pairs(work / "gold_pairs.tsv")) == 3 * 6


def test_pipeline_eval_needs_pairs(tmp_path, capsys):
    code = cli.run(["pipeline", "--stages", "synth,eval", "--set", "synth.mode=feature",
                    "--set", f"paths.work_dir={tmp_path / 'w'}"])
    assert code == 2
    assert "pairs-gold" in capsys.readouterr().err
