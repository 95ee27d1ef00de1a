"""Training and evaluation loops."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .decoders import LengthError, min_ctc_frames
from .encoder import subsampled_length
from .frontend import FrontendConfig, fbank, read_wav
from .model import ASRModel, ModelConfig
from .optim import AdamState, adam_step, lr_at
from .sslcache import FormatError, Manifest, read_features
from .tensor import NumericError
from .wer import corpus_wer

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    grad_accum: int = 4
    noam_scale: float = 1.0
    warmup_steps: int = 25000
    seed: int = 0
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-9
    bucket_batches: int = 4
    train_wer_every: int = 0
    stop_at_zero_wer: bool = False
    max_decode_len: int = 100

    def __post_init__(self):
        for name in ("epochs", "batch_size", "grad_accum", "warmup_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.noam_scale <= 0:
            raise ValueError("noam_scale must be positive")


@dataclass
class Utterance:
    utterance_id: str
    fbank: np.ndarray
    ssl: list[np.ndarray]
    tokens: list[int]
    text: str


@dataclass
class EpochReport:
    epoch: int
    train_loss: float
    valid_loss: float
    valid_wer: float
    seconds: float
    train_wer: float | None = None

    def line(self) -> str:
        fields = [str(self.epoch), f"{self.train_loss:.6f}", f"{self.valid_loss:.6f}",
                  f"{self.valid_wer:.6f}", f"{self.seconds:.3f}"]
        if self.train_wer is not None:
            fields.append(f"{self.train_wer:.6f}")
        return "\t".join(fields)


@dataclass
class TrainResult:
    model: ASRModel
    reports: list[EpochReport] = field(default_factory=list)
    step: int = 0
    best_path: Path | None = None


def load_utterances(manifest: Manifest, model: ASRModel,
                    frontend: FrontendConfig = FrontendConfig()) -> list[Utterance]:
    """Read audio, compute fbank and load the cached SSL features the model consumes."""
    sources = model.cfg.fusion_sources
    out = []
    for rec in manifest:
        if len(rec.feature_paths) < len(sources):
            raise TrainingError(f"{rec.utterance_id}: {len(sources)} SSL sources configured, "
                                f"manifest lists {len(rec.feature_paths)}")
        feats = []
        for tag, rel in zip(sources, rec.feature_paths):
            path = manifest.resolve(rel)
            try:
                feats.append(read_features(path, "synthetic", rec.utterance_id).frames)
            except (OSError, FormatError) as exc:
                raise TrainingError(f"{rec.utterance_id}: cannot load {tag} features: {exc}") from None
        fb = fbank(read_wav(manifest.resolve(rec.audio_path)), frontend).frames
        out.append(Utterance(rec.utterance_id, fb, feats, model.vocab.encode(rec.transcript), rec.transcript))
    return out


def make_batches(utts: list[Utterance], batch_size: int, seed: int, epoch: int,
                 bucket_batches: int = 4) -> list[list[int]]:
    """Seeded shuffle, then length-sorted buckets of ``bucket_batches`` batches, then shuffled batches."""
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(utts))
    span = batch_size * bucket_batches
    batches = []
    for start in range(0, len(order), span):
        bucket = sorted(order[start:start + span], key=lambda i: (utts[i].fbank.shape[0], i))
        batches.extend([int(i) for i in bucket[k:k + batch_size]] for k in range(0, len(bucket), batch_size))
    return [batches[i] for i in rng.permutation(len(batches))]


def _utterance_loss(model: ASRModel, u: Utterance):
    if min_ctc_frames(u.tokens) > subsampled_length(u.fbank.shape[0]):
        raise LengthError(f"{u.utterance_id}: transcript too long for {u.fbank.shape[0]} frames")
    return model.losses(u.fbank, u.ssl, u.tokens)


def mean_loss(model: ASRModel, utts: list[Utterance]) -> float:
    total, n = 0.0, 0
    for u in utts:
        try:
            total += float(_utterance_loss(model, u)[0].data)
        except LengthError:
            continue
        n += 1
    return total / n if n else float("nan")


def decode_all(model: ASRModel, utts: list[Utterance], max_len: int = 100, method: str = "attention"):
    return [model.decode(u.fbank, u.ssl, max_len=max_len, method=method).text for u in utts]


def utterance_wer(model: ASRModel, utts: list[Utterance], max_len: int = 100) -> float:
    hyps = decode_all(model, utts, max_len)
    return corpus_wer(zip([u.text for u in utts], hyps))[0]


def make_checkpoint(model: ASRModel, opt: AdamState, epoch: int, extra: dict | None = None) -> ckpt_io.Checkpoint:
    names = [n for n, _ in model.named_parameters()]
    optimizer = {}
    if opt.m:
        optimizer.update({f"adam.m/{n}": m for n, m in zip(names, opt.m)})
        optimizer.update({f"adam.v/{n}": v for n, v in zip(names, opt.v)})
    return ckpt_io.Checkpoint(model.cfg.to_dict(), model.cfg.fingerprint(), model.state_dict(),
                              optimizer, opt.step, epoch, extra or {})


def restore(ck: ckpt_io.Checkpoint, model: ASRModel | None = None) -> tuple[ASRModel, AdamState]:
    if model is None:
        model = ASRModel(ModelConfig.from_dict(ck.config))
    if model.cfg.fingerprint() != ck.fingerprint:
        raise ckpt_io.CheckpointError(f"checkpoint fingerprint {ck.fingerprint} does not match model "
                                      f"{model.cfg.fingerprint()}")
    model.load_state_dict(ck.params)
    names = [n for n, _ in model.named_parameters()]
    opt = AdamState(step=ck.step)
    if ck.optimizer:
        opt.m = [ck.optimizer[f"adam.m/{n}"].astype(model.state_dict()[n].dtype) for n in names]
        opt.v = [ck.optimizer[f"adam.v/{n}"].astype(model.state_dict()[n].dtype) for n in names]
    return model, opt


def train(train_utts: list[Utterance], valid_utts: list[Utterance], model: ASRModel, cfg: TrainConfig,
          out_dir: str | Path | None = None, opt: AdamState | None = None, start_epoch: int = 1,
          on_step=None) -> TrainResult:
    """Run ``cfg.epochs`` epochs starting at ``start_epoch``.

    Gradients from ``cfg.grad_accum`` micro-batches are summed before each
    optimizer step; a partial window left at the end of an epoch is flushed
    so every epoch ends on a step boundary.
    """
    params = model.parameters()
    opt = opt if opt is not None else AdamState()
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    result = TrainResult(model, step=opt.step)
    best = math.inf
    model.zero_grad()

    def step():
        lr = lr_at(opt.step + 1, cfg.noam_scale, model.cfg.d, cfg.warmup_steps)
        adam_step(params, [p.grad for p in params], opt, lr, cfg.betas, cfg.eps)
        model.zero_grad()
        if on_step is not None:
            on_step(opt.step)

    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        tic = time.perf_counter()
        losses = []
        pending = 0
        for batch in make_batches(train_utts, cfg.batch_size, cfg.seed, epoch, cfg.bucket_batches):
            scale = 1.0 / (len(batch) * cfg.grad_accum)
            for i in batch:
                u = train_utts[i]
                try:
                    loss = _utterance_loss(model, u)[0]
                except LengthError as exc:
                    log.warning("skipping %s", exc)
                    continue
                except NumericError as exc:
                    raise TrainingError(f"non-finite values at step {opt.step + 1} ({u.utterance_id}): {exc}") from None
                value = float(loss.data)
                if not math.isfinite(value):
                    raise TrainingError(f"non-finite loss at step {opt.step + 1} ({u.utterance_id})")
                losses.append(value)
                (loss * scale).backward()
            pending += 1
            if pending == cfg.grad_accum:
                step()
                pending = 0
        if pending:
            step()
        valid_loss = mean_loss(model, valid_utts) if valid_utts else float("nan")
        valid_wer = utterance_wer(model, valid_utts, cfg.max_decode_len) if valid_utts else float("nan")
        train_wer = None
        if cfg.train_wer_every and epoch % cfg.train_wer_every == 0:
            train_wer = utterance_wer(model, train_utts, cfg.max_decode_len)
        report = EpochReport(epoch, float(np.mean(losses)) if losses else float("nan"), valid_loss,
                             valid_wer, time.perf_counter() - tic, train_wer)
        result.reports.append(report)
        log.info("epoch %s", report.line())
        if out:
            with open(out / "train.log", "a", encoding="utf-8") as fh:
                fh.write(report.line() + "\n")
            ck = make_checkpoint(model, opt, epoch)
            ckpt_io.save(ck, out / "last.ckpt")
            if valid_utts and valid_loss < best:
                best = valid_loss
                ckpt_io.save(ck, out / "best.ckpt")
                result.best_path = out / "best.ckpt"
        if cfg.stop_at_zero_wer and train_wer == 0.0:
            break
    result.step = opt.step
    return result


def evaluate(model: ASRModel, manifest: Manifest, frontend: FrontendConfig = FrontendConfig(),
             max_len: int = 100, method: str = "attention"):
    """Decode every utterance; returns (corpus WER, [(id, reference, hypothesis, breakdown)])."""
    check_feature_config(model, manifest)
    utts = load_utterances(manifest, model, frontend)
    hyps = decode_all(model, utts, max_len, method)
    rate, parts = corpus_wer(zip([u.text for u in utts], hyps))
    return rate, [(u.utterance_id, u.text, h, p) for u, h, p in zip(utts, hyps, parts)]


def check_feature_config(model: ASRModel, manifest: Manifest) -> None:
    """Refuse manifests whose SSL features cannot feed ``model``."""
    dims = model.cfg.fusion_dims
    for rec in manifest:
        if len(rec.feature_paths) < len(dims):
            raise ckpt_io.CheckpointError(f"{rec.utterance_id}: model expects {len(dims)} SSL sources, "
                                          f"manifest lists {len(rec.feature_paths)}")
        for dim, rel in zip(dims, rec.feature_paths):
            frames = read_features(manifest.resolve(rel)).frames
            if frames.shape[1] != dim:
                raise ckpt_io.CheckpointError(f"{rec.utterance_id}: feature width {frames.shape[1]} "
                                              f"does not match model configuration ({dim})")
