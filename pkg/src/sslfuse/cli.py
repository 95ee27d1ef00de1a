"""Command-line entry point.

Exit status: 0 success, 1 usage error, 2 data or validation error.
Machine-readable results go to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .config import ConfigFileError, build, read_config
from .corpus import gen_toy_corpus
from .export import AttentionMap, write_attention_csv
from .frontend import FrontendConfig, InputError, fbank, read_wav
from .model import ASRModel, ModelConfig, param_count
from .sslcache import (FormatError, SynthConfig, decode_features, read_manifest, synth_features,
                       validate_manifest, write_features)
from .train import TrainConfig, TrainingError, evaluate, load_utterances, restore, train
from .wer import corpus_wer

log = logging.getLogger("sslfuse")

DATA_ERRORS = (FormatError, TrainingError, ckpt_io.CheckpointError, InputError, ConfigFileError,
               FileNotFoundError, KeyError, ValueError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _model_config(args, values) -> ModelConfig:
    overrides = {"mode": args.mode, "seed": args.seed}
    if args.ssl_source:
        overrides["ssl_sources"] = args.ssl_source
    return build(ModelConfig, values, **overrides)


def _frontend(cfg: ModelConfig, values) -> FrontendConfig:
    return build(FrontendConfig, values, num_mel_bins=cfg.n_mels)


def _synth_config(values, tag: str, seed: int | None) -> SynthConfig:
    prefixed = {k[len("synth."):]: v for k, v in values.items() if k.startswith("synth.")}
    return build(SynthConfig, prefixed, source_tag=tag, seed=seed)


def _read_pairs(path: str) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        uid, _, text = line.partition("\t")
        out[uid] = text
    return out


# -- subcommands ---------------------------------------------------------------------
def cmd_features_synth(args, values) -> int:
    manifest = read_manifest(args.manifest)
    if not args.ssl_source:
        raise UsageError("features synth needs at least one --ssl-source")
    out = Path(args.out)
    for tag in args.ssl_source:
        (out / tag).mkdir(parents=True, exist_ok=True)
    for rec in manifest:
        w = read_wav(manifest.resolve(rec.audio_path))
        for tag in args.ssl_source:
            cfg = _synth_config(values, tag, args.seed)
            path = (out / tag / f"{rec.utterance_id}.ssf").resolve()
            write_features(synth_features(rec.utterance_id, len(w), cfg, w.samples), path)
            rec.feature_paths.append(str(path))
    for rec in manifest:
        print("\t".join([rec.utterance_id, rec.audio_path, rec.transcript, *rec.feature_paths]))
    return 0


def cmd_features_validate(args, values) -> int:
    bad = 0
    for f in args.files:
        try:
            frames = decode_features(Path(f).read_bytes())
        except (FormatError, OSError) as exc:
            print(f"{f}\tERROR\t{exc}")
            print(f"{f}: {exc}", file=sys.stderr)
            bad += 1
        else:
            print(f"{f}\tOK\t{frames.shape[0]}x{frames.shape[1]}")
    if args.manifest:
        report = validate_manifest(read_manifest(args.manifest), args.ssl_source or None)
        for uid, problems in report.items():
            for p in problems:
                print(f"{uid}\tERROR\t{p}")
        bad += len(report)
    if not args.files and not args.manifest:
        raise UsageError("features validate needs SSF1 files or --manifest")
    return 2 if bad else 0


def cmd_fbank(args, values) -> int:
    cfg = build(FrontendConfig, values)
    seq = fbank(read_wav(args.wav), cfg)
    if args.out:
        np.savetxt(args.out, seq.frames, fmt="%.9g", delimiter="\t")
    else:
        np.savetxt(sys.stdout, seq.frames, fmt="%.9g", delimiter="\t")
    print(f"{seq.frames.shape[0]} frames x {seq.frames.shape[1]} bins", file=sys.stderr)
    return 0


def cmd_train(args, values) -> int:
    mcfg = _model_config(args, values)
    tcfg = build(TrainConfig, values, seed=args.seed)
    model = ASRModel(mcfg)
    front = _frontend(mcfg, values)
    train_utts = load_utterances(read_manifest(args.manifest), model, front)
    valid_utts = load_utterances(read_manifest(args.valid), model, front) if args.valid else []
    result = train(train_utts, valid_utts, model, tcfg, out_dir=args.out)
    for r in result.reports:
        print(r.line())
    return 0


def _load_model(path: str) -> ASRModel:
    ck = ckpt_io.load(path)
    model, _ = restore(ck)
    return model


def cmd_decode(args, values) -> int:
    model = _load_model(args.checkpoint)
    rate, rows = evaluate(model, read_manifest(args.manifest), _frontend(model.cfg, values),
                          method=args.method)
    lines = [f"{uid}\t{hyp}" for uid, _, hyp, _ in rows]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        print("\n".join(lines))
    print(f"corpus WER {rate:.4f}", file=sys.stderr)
    return 0


def cmd_score(args, values) -> int:
    hyps = _read_pairs(args.hyp)
    if args.manifest:
        refs = {r.utterance_id: r.transcript for r in read_manifest(args.manifest)}
    elif args.ref:
        refs = _read_pairs(args.ref)
    else:
        raise UsageError("score needs --ref or --manifest")
    missing = [uid for uid in refs if uid not in hyps]
    for uid in missing:
        print(f"{uid}: no hypothesis, scored as empty", file=sys.stderr)
    ids = list(refs)
    rate, parts = corpus_wer([(refs[u], hyps.get(u, "")) for u in ids])
    out = {
        "wer": rate,
        "substitutions": sum(p.substitutions for p in parts),
        "deletions": sum(p.deletions for p in parts),
        "insertions": sum(p.insertions for p in parts),
        "words": sum(p.ref_words for p in parts),
    }
    print(json.dumps(out))
    return 0


def cmd_attn_dump(args, values) -> int:
    model = _load_model(args.checkpoint)
    if model.cfg.mode not in ("ca", "multi-ca"):
        print(f"no attention in {model.cfg.mode.upper()} mode", file=sys.stderr)
        return 2
    manifest = read_manifest(args.manifest)
    rec = manifest.get(args.utterance_id)
    sub = type(manifest)([rec], manifest.root)
    utt = load_utterances(sub, model, _frontend(model.cfg, values))[0]
    maps = model.encode(utt.fbank, utt.ssl).attention
    out = Path(args.out)
    written = []
    for k, (tag, weights) in enumerate(zip(model.cfg.fusion_sources, maps)):
        path = out if len(maps) == 1 else out.with_name(f"{out.stem}.{tag}{out.suffix}")
        write_attention_csv(AttentionMap(rec.utterance_id, tag, weights), path)
        written.append(str(path))
    print("\n".join(written))
    return 0


def cmd_params(args, values) -> int:
    cfg = _model_config(args, values)
    report = param_count(cfg)
    if args.check:
        registered = ASRModel(cfg).num_parameters()
        report["registered"] = registered
        if registered != report["total"]:
            print(json.dumps(report))
            return 2
    print(json.dumps(report))
    return 0


def cmd_toy_corpus(args, values) -> int:
    manifests = gen_toy_corpus(args.seed if args.seed is not None else 0, args.out)
    for name in manifests:
        print(Path(args.out) / f"{name}.tsv")
    return 0


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")

    model_opts = _Parser(add_help=False)
    model_opts.add_argument("--mode", choices=["none", "sfa", "ca", "multi-ca"])
    model_opts.add_argument("--ssl-source", action="append", default=[])

    p = _Parser(prog="sslfuse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    feats = sub.add_parser("features", help="synthesise or validate SSF1 feature files")
    fsub = feats.add_subparsers(dest="action", parser_class=_Parser)
    fs = fsub.add_parser("synth", parents=[common])
    fs.add_argument("--manifest", required=True)
    fs.add_argument("--ssl-source", action="append", default=[])
    fs.add_argument("--out", required=True)
    fs.set_defaults(func=cmd_features_synth)
    fv = fsub.add_parser("validate", parents=[common])
    fv.add_argument("files", nargs="*")
    fv.add_argument("--manifest")
    fv.add_argument("--ssl-source", action="append", default=[])
    fv.set_defaults(func=cmd_features_validate)

    fb = sub.add_parser("fbank", parents=[common], help="log-mel features of a WAV file")
    fb.add_argument("--wav", required=True)
    fb.add_argument("--out")
    fb.set_defaults(func=cmd_fbank)

    tr = sub.add_parser("train", parents=[common, model_opts])
    tr.add_argument("--manifest", required=True)
    tr.add_argument("--valid")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    de = sub.add_parser("decode", parents=[common])
    de.add_argument("--checkpoint", required=True)
    de.add_argument("--manifest", required=True)
    de.add_argument("--method", choices=["attention", "ctc"], default="attention")
    de.add_argument("--out")
    de.set_defaults(func=cmd_decode)

    sc = sub.add_parser("score", parents=[common])
    sc.add_argument("--hyp", required=True)
    sc.add_argument("--ref")
    sc.add_argument("--manifest")
    sc.set_defaults(func=cmd_score)

    ad = sub.add_parser("attn-dump", parents=[common])
    ad.add_argument("--checkpoint", required=True)
    ad.add_argument("--manifest", required=True)
    ad.add_argument("--utterance-id", required=True)
    ad.add_argument("--out", required=True)
    ad.set_defaults(func=cmd_attn_dump)

    pa = sub.add_parser("params", parents=[common, model_opts])
    pa.add_argument("--check", action="store_true", help="cross-check against a built model")
    pa.set_defaults(func=cmd_params)

    tc = sub.add_parser("toy-corpus", parents=[common])
    tc.add_argument("--out", required=True)
    tc.set_defaults(func=cmd_toy_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        values = read_config(args.config)
        return args.func(args, values)
    except UsageError as exc:
        print(f"sslfuse: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"sslfuse: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
