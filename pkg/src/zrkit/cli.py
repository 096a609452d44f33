"""
Command-line entry point: zero-resource speech features and same-different evaluation.

Every subcommand resolves one :class:`PipelineConfig` from defaults, an
optional JSON file and ``--set`` overrides, writes the resolved config next
to its outputs, and talks to other stages only through files.

Exit codes: 0 success, 1 domain error, 2 usage or I/O error.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

import numpy as np

from . import cae, corpus_io, frontend, pairs, synthcorpus, vtln
from .errors import ZrkitError
from .evaluation import DtwConfig, evaluate
from .pairs import PairConstraints
from .parallel import JOBS_ENV, default_jobs

log = logging.getLogger("zrkit")

STAGES = ("synth", "mfcc", "vtln-train", "vtln-estimate", "vtln-apply", "pairs-gold",
          "pairs-utd", "pairs-frames", "cae-pretrain", "cae-train", "cae-encode",
          "import-features", "eval")

DEFAULT_STAGES = ("synth", "mfcc", "pairs-gold", "eval", "vtln-train", "vtln-apply", "eval",
                  "pairs-frames", "cae-pretrain", "cae-train", "cae-encode", "eval")


class UsageError(Exception):
    """Bad command line or config file; maps to exit code 2."""


@dataclasses.dataclass(frozen=True)
class PathsConfig:
    manifest: str = None
    alignments: str = None
    utd_pairs: str = None
    features: str = None        # starting archive (.zrfa) or text matrices for import
    work_dir: str = "work"


@dataclasses.dataclass(frozen=True)
class EncodeConfig:
    layer: int = None           # 1-based hidden layer; None = last hidden layer


SECTIONS = {
    "frontend": frontend.FrontendConfig,
    "vtln": vtln.VtlnConfig,
    "cae": cae.CaeConfig,
    "dtw": DtwConfig,
    "pairs": PairConstraints,
    "synth": synthcorpus.SynthConfig,
    "encode": EncodeConfig,
    "paths": PathsConfig,
}

# sections whose `seed` follows the global seed unless set explicitly
_SEEDED = ("cae", "synth")

# command-line defaults that differ from the library ones: synthesize audio so
# the frontend and VTLN stages apply, and size the UBM for a desk corpus of
# about a hundred tokens (64 components overfit it and find no warps)
_PIPELINE_DEFAULTS = {"synth": {"mode": "audio"}, "vtln": {"n_components": 32}}


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    frontend: frontend.FrontendConfig
    vtln: vtln.VtlnConfig
    cae: cae.CaeConfig
    dtw: DtwConfig
    pairs: PairConstraints
    synth: synthcorpus.SynthConfig
    encode: EncodeConfig
    paths: PathsConfig
    seed: int = 0
    stages: tuple = DEFAULT_STAGES

    def to_dict(self):
        out = {name: dataclasses.asdict(getattr(self, name)) for name in SECTIONS}
        out["seed"] = self.seed
        out["stages"] = list(self.stages)
        return json.loads(json.dumps(out))   # tuples -> lists


def _field_names(cls):
    return [f.name for f in dataclasses.fields(cls)]


def _owner_of(key):
    owners = [name for name, cls in SECTIONS.items() if key in _field_names(cls)]
    if not owners:
        raise UsageError(f"unknown config key {key!r}")
    if len(owners) > 1:
        raise UsageError(f"config key {key!r} is ambiguous; use one of "
                         + ", ".join(f"{o}.{key}" for o in owners))
    return owners[0]


def _merge(target, data, origin):
    """Fold a nested or flat mapping into ``target[section][key]``."""
    for key, value in data.items():
        if key in ("seed", "stages"):
            target[key] = value
        elif key in SECTIONS:
            if not isinstance(value, dict):
                raise UsageError(f"{origin}: section {key!r} must be an object")
            known = _field_names(SECTIONS[key])
            for sub, v in value.items():
                if sub not in known:
                    raise UsageError(f"{origin}: unknown config key {key}.{sub!r}")
                target[key][sub] = v
        else:
            target[_owner_of(key)][key] = value


def _parse_override(text):
    if "=" not in text:
        raise UsageError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    section, _, name = key.rpartition(".")
    if section:
        key = name
        if section not in SECTIONS:
            raise UsageError(f"unknown config section {section!r}")
        if key not in _field_names(SECTIONS[section]):
            raise UsageError(f"unknown config key {section}.{key!r}")
        return {section: {key: value}}
    return {key: value}


def _build(cls, values, section):
    try:
        return cls(**values)
    except (TypeError, ValueError, ZrkitError) as exc:
        raise UsageError(f"section {section!r}: {exc}") from None


def resolve_config(path=None, overrides=(), seed=None, stages=None):
    """Defaults, then the JSON file at `path`, then `overrides`, then `seed`.

    `overrides` are ``key=value`` or ``section.key=value`` strings; values
    are parsed as JSON when possible. Unknown keys are errors.
    """
    layered = {name: dict(_PIPELINE_DEFAULTS.get(name, {})) for name in SECTIONS}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
        if text.strip():
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}: invalid JSON ({exc})") from None
            if not isinstance(data, dict):
                raise UsageError(f"{path}: top level must be an object")
            _merge(layered, data, path)
    for text in overrides:
        _merge(layered, _parse_override(text), "--set")
    if seed is not None:
        layered["seed"] = seed
    if stages is not None:
        layered["stages"] = stages

    global_seed = layered.pop("seed", 0)
    if not isinstance(global_seed, int):
        raise UsageError(f"seed must be an integer, got {global_seed!r}")
    stage_list = tuple(layered.pop("stages", DEFAULT_STAGES))
    for s in stage_list:
        if s not in STAGES:
            raise UsageError(f"unknown stage {s!r}; choose from {', '.join(STAGES)}")
    for name in _SEEDED:
        layered[name].setdefault("seed", global_seed)
    built = {name: _build(SECTIONS[name], layered[name], name) for name in SECTIONS}
    return PipelineConfig(seed=global_seed, stages=stage_list, **built)


# ---------------------------------------------------------------------------
# helpers

def _require(path, what):
    if path is None:
        raise UsageError(f"no {what} given")
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return parent


def write_echo(out_dir, command, config, jobs, io):
    """Resolved config plus the I/O paths of one command, sufficient to rerun it."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{command}.config.json")
    echo = {"command": command, "seed": config.seed, "jobs": jobs, "io": io,
            "config": config.to_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_matrices(records, path):
    corpus_io.write_records([(k, v, 0.0, 0.0) for k, v in records], path)


def write_frame_pairs(frame_pairs, path):
    """ZRFA container with records ``inputs`` and ``targets``."""
    _write_matrices([("inputs", frame_pairs.inputs), ("targets", frame_pairs.targets)], path)


def read_frame_pairs(path):
    recs = {r[0]: r[1].astype(np.float64) for r in corpus_io.read_records(path)}
    if set(recs) != {"inputs", "targets"}:
        raise ZrkitError(f"{path}: frame-pair container needs exactly 'inputs' and 'targets'")
    if recs["inputs"].shape != recs["targets"].shape:
        raise ZrkitError(f"{path}: inputs and targets differ in shape")
    return pairs.FramePairSet(recs["inputs"], recs["targets"], seed=None)


def _load_manifest(path):
    return corpus_io.load_manifest(_require(path, "manifest"))


def _load_archive(path):
    return corpus_io.read_feature_archive(_require(path, "feature archive"))


# ---------------------------------------------------------------------------
# stage implementations (paths in, paths out)

def do_synth(cfg, out_dir, jobs):
    t0 = time.perf_counter()
    wav_dir = os.path.join(out_dir, "wav") if cfg.synth.mode == "audio" else None
    corpus = synthcorpus.generate(cfg.synth, wav_dir)
    paths = synthcorpus.write_corpus(corpus, out_dir)
    log.info("synth: %d utterances in %.1fs", len(corpus.manifest.entries),
             time.perf_counter() - t0)
    return paths


def do_mfcc(cfg, manifest_path, out, jobs, warps_path=None, cmn=True):
    manifest = _load_manifest(manifest_path)
    warps = None
    if warps_path is not None:
        warps = vtln.read_warps(_require(warps_path, "warp table"), cfg.vtln.warp_grid)
    archive = frontend.extract_corpus(manifest, cfg.frontend, warps=warps, cmn=cmn, jobs=jobs)
    _ensure_parent(out)
    corpus_io.write_feature_archive(archive, out)
    return archive


def do_vtln_train(cfg, manifest_path, out_ubm, out_warps, jobs):
    manifest = _load_manifest(manifest_path)
    ubm, warps = vtln.train_vtln(manifest, cfg.frontend, cfg.vtln, cfg.seed, jobs)
    _ensure_parent(out_ubm)
    vtln.write_gmm(ubm, out_ubm)
    if out_warps is not None:
        _ensure_parent(out_warps)
        vtln.write_warps(warps, out_warps)
    log.info("vtln-train warps: %s", warps)
    return ubm, warps


def do_vtln_estimate(cfg, manifest_path, ubm_path, out, jobs):
    manifest = _load_manifest(manifest_path)
    ubm = vtln.read_gmm(_require(ubm_path, "UBM"))
    warps = vtln.estimate_warps(manifest, ubm, cfg.frontend, cfg.vtln, jobs)
    _ensure_parent(out)
    vtln.write_warps(warps, out)
    return warps


def do_vtln_apply(cfg, manifest_path, warps_path, out, jobs):
    return do_mfcc(cfg, manifest_path, out, jobs, warps_path=warps_path, cmn=True)


def do_pairs_gold(cfg, alignments_path, manifest_path, out_dir, frame_shift):
    manifest = _load_manifest(manifest_path)
    ali = corpus_io.load_alignments(_require(alignments_path, "alignments"))
    segs = pairs.select_segments(ali, manifest, cfg.pairs, frame_shift)
    gold = pairs.make_gold_pairs(segs)
    ev, counts = pairs.make_eval_pairs(segs)
    os.makedirs(out_dir, exist_ok=True)
    out = {"segments": os.path.join(out_dir, "segments.tsv"),
           "gold_pairs": os.path.join(out_dir, "gold_pairs.tsv"),
           "eval_pairs": os.path.join(out_dir, "eval_pairs.tsv")}
    pairs.write_segments(segs, out["segments"])
    pairs.write_pairs(gold, out["gold_pairs"])
    pairs.write_pairs(ev, out["eval_pairs"])
    log.info("pairs-gold: %d segments, counts %s", len(segs), counts)
    return out


def do_pairs_utd(cfg, utd_path, manifest_path, out, frame_shift):
    manifest = _load_manifest(manifest_path)
    entries = corpus_io.load_utd_pairs(_require(utd_path, "UTD pair file"), manifest)
    segment_pairs, dropped = pairs.utd_pairs_to_segment_pairs(entries, manifest, frame_shift)
    if dropped:
        log.warning("pairs-utd: dropped %d pairs shorter than two frames", dropped)
    _ensure_parent(out)
    pairs.write_pairs(segment_pairs, out)
    return segment_pairs


def do_pairs_frames(cfg, pairs_path, features_path, out, jobs):
    segment_pairs = pairs.read_pairs(_require(pairs_path, "pair file"))
    archive = _load_archive(features_path)
    fp = pairs.extract_frame_pairs(segment_pairs, archive, cfg.seed, jobs)
    _ensure_parent(out)
    write_frame_pairs(fp, out)
    log.info("pairs-frames: %d frame pairs", len(fp))
    return fp


def do_cae_pretrain(cfg, features_path, out):
    archive = _load_archive(features_path)
    frames = np.concatenate([s.frames for s in archive]).astype(np.float64)
    model, train_log = cae.pretrain_layerwise(frames, cfg.cae)
    _ensure_parent(out)
    cae.write_model(model, out)
    train_log.write_csv(os.path.splitext(out)[0] + ".log.csv")
    return model


def do_cae_train(cfg, model_path, frame_pairs_path, out):
    model = cae.read_model(_require(model_path, "model"))
    fp = read_frame_pairs(_require(frame_pairs_path, "frame-pair file"))
    model, train_log = cae.finetune_correspondence(model, fp, cfg.cae)
    _ensure_parent(out)
    cae.write_model(model, out)
    train_log.write_csv(os.path.splitext(out)[0] + ".log.csv")
    return model


def do_cae_encode(cfg, model_path, features_path, out):
    model = cae.read_model(_require(model_path, "model"))
    archive = _load_archive(features_path)
    encoded = cae.encode_archive(model, archive, cfg.encode.layer)
    _ensure_parent(out)
    corpus_io.write_feature_archive(encoded, out)
    return encoded


def do_import(cfg, text_path, out, manifest_path=None):
    manifest = _load_manifest(manifest_path) if manifest_path else None
    seqs = corpus_io.import_text_features(_require(text_path, "text feature file"),
                                          cfg.frontend.frame_shift, cfg.frontend.frame_length,
                                          manifest)
    _ensure_parent(out)
    corpus_io.write_feature_archive(seqs, out)
    return seqs


def do_eval(cfg, features_path, pairs_path, out, jobs, label="", curve_path=None):
    archive = _load_archive(features_path)
    eval_pairs = pairs.read_pairs(_require(pairs_path, "pair file"))
    report = evaluate(archive, eval_pairs, cfg.dtw, label, jobs)
    _ensure_parent(out)
    report.write_json(out)
    if curve_path is not None:
        report.write_curve_csv(curve_path)
    log.info("eval %s: AP = %.4f", label or features_path, report.average_precision)
    return report


# ---------------------------------------------------------------------------
# pipeline

def run_pipeline(cfg, jobs):
    """Run ``cfg.stages`` in order inside ``cfg.paths.work_dir``.

    Feature-producing stages (mfcc, vtln-apply, cae-encode, import-features)
    update the "current" archive that later stages consume. Returns the
    mapping of reports written, keyed by label.
    """
    work = cfg.paths.work_dir
    os.makedirs(work, exist_ok=True)
    p = lambda name: os.path.join(work, name)  # noqa: E731
    manifest = cfg.paths.manifest
    alignments = cfg.paths.alignments
    features = cfg.paths.features
    label = "input"
    train_pairs = eval_pairs = None
    reports = {}
    shift = cfg.frontend.frame_shift
    for stage in cfg.stages:
        t0 = time.perf_counter()
        if stage == "synth":
            out = do_synth(cfg, p("corpus"), jobs)
            manifest, alignments = out["manifest"], out["alignments"]
            if "features" in out:
                features, label = out["features"], "synth"
        elif stage == "mfcc":
            do_mfcc(cfg, manifest, p("mfcc.zrfa"), jobs)
            features, label = p("mfcc.zrfa"), "mfcc"
        elif stage == "vtln-train":
            do_vtln_train(cfg, manifest, p("ubm.zrfa"), p("warps.tsv"), jobs)
        elif stage == "vtln-estimate":
            do_vtln_estimate(cfg, manifest, p("ubm.zrfa"), p("warps.tsv"), jobs)
        elif stage == "vtln-apply":
            do_vtln_apply(cfg, manifest, p("warps.tsv"), p("vtln.zrfa"), jobs)
            features, label = p("vtln.zrfa"), "vtln"
        elif stage == "pairs-gold":
            out = do_pairs_gold(cfg, alignments, manifest, work, shift)
            train_pairs, eval_pairs = out["gold_pairs"], out["eval_pairs"]
        elif stage == "pairs-utd":
            do_pairs_utd(cfg, cfg.paths.utd_pairs, manifest, p("utd_pairs.tsv"), shift)
            train_pairs = p("utd_pairs.tsv")
        elif stage == "pairs-frames":
            do_pairs_frames(cfg, train_pairs, features, p("frame_pairs.zrfa"), jobs)
        elif stage == "cae-pretrain":
            do_cae_pretrain(cfg, features, p("cae_pretrained.zrfa"))
        elif stage == "cae-train":
            do_cae_train(cfg, p("cae_pretrained.zrfa"), p("frame_pairs.zrfa"), p("cae.zrfa"))
        elif stage == "cae-encode":
            do_cae_encode(cfg, p("cae.zrfa"), features, p("cae_features.zrfa"))
            features, label = p("cae_features.zrfa"), "cae"
        elif stage == "import-features":
            do_import(cfg, cfg.paths.features, p("imported.zrfa"), manifest)
            features, label = p("imported.zrfa"), "imported"
        elif stage == "eval":
            if eval_pairs is None:
                raise UsageError("stage 'eval' needs a preceding 'pairs-gold' stage")
            out = p(f"report-{label}.json")
            report = do_eval(cfg, features, eval_pairs, out, jobs, label,
                             p(f"curve-{label}.csv"))
            reports[label] = out
            report.write_json(p("report.json"))
        log.info("stage %s done in %.1fs", stage, time.perf_counter() - t0)
    return reports


# ---------------------------------------------------------------------------
# argument parsing

def _common(parser):
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config value (repeatable)")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("--jobs", type=int, default=None,
                        help=f"worker budget (default ${JOBS_ENV} or 1)")
    parser.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    parser = argparse.ArgumentParser(prog="zrkit", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        _common(sp)
        return sp

    sp = add("synth", "generate a synthetic corpus")
    sp.add_argument("--out-dir", required=True)

    sp = add("mfcc", "extract MFCC + deltas + per-speaker CMN")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--warps", help="optional warp table")
    sp.add_argument("--no-cmn", action="store_true")

    sp = add("vtln-train", "train the VTLN reference UBM and estimate warps")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True, help="UBM container")
    sp.add_argument("--warps-out", help="warp table estimated under the final UBM")

    sp = add("vtln-estimate", "estimate per-speaker warps under a UBM")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--ubm", required=True)
    sp.add_argument("--out", required=True)

    sp = add("vtln-apply", "extract features with per-speaker warps")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--warps", required=True)
    sp.add_argument("--out", required=True)

    sp = add("pairs-gold", "select word segments and build gold/eval pairs")
    sp.add_argument("--alignments", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out-dir", required=True)

    sp = add("pairs-utd", "convert discovered pairs to segment pairs")
    sp.add_argument("--utd", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)

    sp = add("pairs-frames", "DTW-align segment pairs into frame pairs")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)

    sp = add("cae-pretrain", "layer-wise autoencoder pretraining")
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)

    sp = add("cae-train", "correspondence fine-tuning")
    sp.add_argument("--model", required=True)
    sp.add_argument("--frame-pairs", required=True)
    sp.add_argument("--out", required=True)

    sp = add("cae-encode", "encode an archive with a trained network")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--layer", type=int, help="1-based hidden layer to read out")

    sp = add("import-features", "convert text matrices to a ZRFA archive")
    sp.add_argument("--text", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--manifest")

    sp = add("eval", "same-different evaluation")
    sp.add_argument("--features", required=True)
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--curve", help="also write the precision-recall curve as CSV")
    sp.add_argument("--label", default="")

    sp = add("pipeline", "run a declared stage list")
    sp.add_argument("--stages", help="comma-separated stage list (overrides the config)")
    return parser


def _dispatch(args, cfg, jobs):
    c = args.command
    if c == "synth":
        out = do_synth(cfg, args.out_dir, jobs)
        return args.out_dir, out
    if c == "mfcc":
        do_mfcc(cfg, args.manifest, args.out, jobs, args.warps, cmn=not args.no_cmn)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "vtln-train":
        do_vtln_train(cfg, args.manifest, args.out, args.warps_out, jobs)
        return _ensure_parent(args.out), {"out": args.out, "warps_out": args.warps_out}
    if c == "vtln-estimate":
        do_vtln_estimate(cfg, args.manifest, args.ubm, args.out, jobs)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "vtln-apply":
        do_vtln_apply(cfg, args.manifest, args.warps, args.out, jobs)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "pairs-gold":
        out = do_pairs_gold(cfg, args.alignments, args.manifest, args.out_dir,
                            cfg.frontend.frame_shift)
        return args.out_dir, out
    if c == "pairs-utd":
        do_pairs_utd(cfg, args.utd, args.manifest, args.out, cfg.frontend.frame_shift)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "pairs-frames":
        do_pairs_frames(cfg, args.pairs, args.features, args.out, jobs)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "cae-pretrain":
        do_cae_pretrain(cfg, args.features, args.out)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "cae-train":
        do_cae_train(cfg, args.model, args.frame_pairs, args.out)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "cae-encode":
        if args.layer is not None:
            cfg = dataclasses.replace(cfg, encode=EncodeConfig(args.layer))
        do_cae_encode(cfg, args.model, args.features, args.out)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "import-features":
        do_import(cfg, args.text, args.out, args.manifest)
        return _ensure_parent(args.out), {"out": args.out}
    if c == "eval":
        do_eval(cfg, args.features, args.pairs, args.out, jobs, args.label, args.curve)
        return _ensure_parent(args.out), {"out": args.out, "curve": args.curve}
    if c == "pipeline":
        reports = run_pipeline(cfg, jobs)
        return cfg.paths.work_dir, reports
    raise UsageError(f"unknown command {c!r}")


def _setup_logging(verbosity):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 \
        else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


def run(argv=None):
    """Parse `argv`, run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    _setup_logging(args.verbose)
    jobs = args.jobs if args.jobs is not None else default_jobs()
    try:
        if jobs < 1:
            raise UsageError("--jobs must be >= 1")
        stages = None
        if getattr(args, "stages", None):
            stages = [s.strip() for s in args.stages.split(",") if s.strip()]
        cfg = resolve_config(args.config, args.overrides, args.seed, stages)
        out_dir, io = _dispatch(args, cfg, jobs)
        write_echo(out_dir, args.command, cfg, jobs, io)
    except UsageError as exc:
        print(f"zrkit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ZrkitError as exc:
        print(f"zrkit {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        msg = str(exc) if exc.filename is None else f"{exc.strerror}: {exc.filename}"
        print(f"zrkit {args.command}: {msg}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
