"""Bit-exact cache of precomputed self-supervised speech features.

SSF1 layout (little-endian)::

    0   4s  magic b"SSF1"
    4   u16 version (1)
    6   u16 reserved, zero
    8   u32 frames T'
    12  u32 dim d'
    16  u32 CRC-32 of bytes 0..15 followed by the payload
    20  12x reserved, zero
    32  T' * d' float32, frame-major

The checksum word lets the reader reject payload corruption as well as
header damage.
"""
from __future__ import annotations

import hashlib
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_UMASK = os.umask(0)
os.umask(_UMASK)

MAGIC = b"SSF1"
VERSION = 1
HEADER = struct.Struct("<4sHHIII12x")
HEADER_SIZE = 32
assert HEADER.size == HEADER_SIZE

SSL_DIMS = {"w2v-base": 768, "hubert-base": 768, "hubert-large": 1024}


class FormatError(ValueError):
    """A feature file violates the SSF1 layout."""


class StorageError(OSError):
    """A feature file could not be written."""


def expected_dim(source_tag: str) -> int | None:
    """Registered width for ``source_tag``; None for synthetic (configurable) sources."""
    if source_tag in SSL_DIMS:
        return SSL_DIMS[source_tag]
    if source_tag.startswith("synthetic"):
        return None
    raise ValueError(f"unknown SSL source {source_tag!r}")


@dataclass
class SSLSequence:
    frames: np.ndarray
    source_tag: str = "synthetic"
    utterance_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        if self.frames.ndim != 2:
            raise ValueError(f"SSL frames must be a matrix, got shape {self.frames.shape}")
        want = expected_dim(self.source_tag)
        if want is not None and self.frames.shape[1] != want:
            raise ValueError(f"{self.source_tag} features must be {want}-dimensional, got {self.frames.shape[1]}")

    def __len__(self) -> int:
        return self.frames.shape[0]


def encode_features(frames: np.ndarray) -> bytes:
    frames = np.ascontiguousarray(frames, dtype="<f4")
    if frames.ndim != 2 or frames.shape[0] == 0 or frames.shape[1] == 0:
        raise ValueError(f"cannot store an empty or non-matrix feature array of shape {frames.shape}")
    n, d = frames.shape
    payload = frames.tobytes()
    head = struct.pack("<4sHHII", MAGIC, VERSION, 0, n, d)
    crc = zlib.crc32(payload, zlib.crc32(head))
    return HEADER.pack(MAGIC, VERSION, 0, n, d, crc) + payload


def decode_features(blob: bytes) -> np.ndarray:
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"truncated header: {len(blob)} of {HEADER_SIZE} bytes")
    magic, version, reserved, n, d, crc = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if reserved != 0 or any(blob[20:HEADER_SIZE]):
        raise FormatError("reserved header bytes are not zero")
    if n == 0 or d == 0:
        raise FormatError(f"empty feature matrix ({n} x {d})")
    expected = 4 * n * d
    if len(blob) - HEADER_SIZE != expected:
        raise FormatError(f"payload length mismatch: header declares {expected} bytes, "
                          f"file holds {len(blob) - HEADER_SIZE}")
    payload = blob[HEADER_SIZE:]
    if zlib.crc32(payload, zlib.crc32(blob[:16])) != crc:
        raise FormatError("checksum mismatch")
    return np.frombuffer(payload, dtype="<f4").reshape(n, d).copy()


def write_features(seq: SSLSequence, path: str | Path) -> None:
    """Atomically write ``seq`` as an SSF1 file."""
    blob = encode_features(seq.frames)
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"{path}: {exc}") from exc


def read_features(path: str | Path, source_tag: str = "synthetic", utterance_id: str = "") -> SSLSequence:
    with open(path, "rb") as fh:
        blob = fh.read()
    try:
        frames = decode_features(blob)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return SSLSequence(frames, source_tag, utterance_id)


# -- synthetic stand-in for a pretrained SSL model ----------------------------
@dataclass(frozen=True)
class SynthConfig:
    stride: int = 320
    dim: int = 768
    seed: int = 0
    noise_scale: float = 1.0
    content_scale: float = 0.0
    content_mels: int = 40
    sample_rate: int = 16000
    source_tag: str = "synthetic"


def _utterance_seed(utterance_id: str, seed: int) -> list[int]:
    digest = hashlib.sha256(utterance_id.encode("utf-8")).digest()
    return [seed, int.from_bytes(digest[:8], "little")]


def _content_projection(cfg: SynthConfig) -> np.ndarray:
    rng = np.random.default_rng([cfg.seed, 0x5EED])
    return rng.standard_normal((cfg.content_mels, cfg.dim)) / np.sqrt(cfg.content_mels)


def synth_features(utterance_id: str, waveform_len: int, cfg: SynthConfig = SynthConfig(),
                   samples: np.ndarray | None = None) -> SSLSequence:
    """Deterministic pseudo-SSL features with one frame per ``cfg.stride`` samples.

    The noise channel depends only on (seed, utterance id, frame index). With
    ``content_scale > 0`` and ``samples`` given, each frame also carries a
    fixed random projection of the log-mel energy of its own audio window,
    so the features are learnable.
    """
    from .frontend import mel_filterbank

    n = waveform_len // cfg.stride
    rng = np.random.default_rng(_utterance_seed(utterance_id, cfg.seed))
    feats = cfg.noise_scale * rng.standard_normal((n, cfg.dim))
    if cfg.content_scale and samples is not None and n:
        chunks = np.asarray(samples[: n * cfg.stride], dtype=np.float64).reshape(n, cfg.stride)
        n_fft = 1 << (cfg.stride - 1).bit_length()
        spec = np.abs(np.fft.rfft(chunks * np.hanning(cfg.stride), n=n_fft, axis=1))
        mel = np.log(np.maximum(spec @ mel_filterbank(cfg.content_mels, n_fft, cfg.sample_rate).T, 1e-6))
        mel = (mel - mel.mean(axis=1, keepdims=True)) / (mel.std(axis=1, keepdims=True) + 1e-6)
        feats = feats + cfg.content_scale * (mel @ _content_projection(cfg))
    return SSLSequence(feats.astype(np.float32), cfg.source_tag, utterance_id)


# -- manifest -------------------------------------------------------------------
@dataclass
class UtteranceRecord:
    utterance_id: str
    audio_path: str
    transcript: str
    feature_paths: list[str] = field(default_factory=list)


@dataclass
class Manifest:
    records: list[UtteranceRecord]
    root: Path = Path(".")

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.root / path

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def get(self, utterance_id: str) -> UtteranceRecord:
        for rec in self.records:
            if rec.utterance_id == utterance_id:
                return rec
        raise KeyError(utterance_id)


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    records = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 3:
            raise FormatError(f"{path}:{lineno}: expected at least 3 tab-separated fields")
        records.append(UtteranceRecord(fields[0], fields[1], fields[2], fields[3:]))
    return Manifest(records, path.parent)


def write_manifest(m: Manifest, path: str | Path) -> None:
    lines = ["\t".join([r.utterance_id, r.audio_path, r.transcript, *r.feature_paths]) for r in m.records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def validate_manifest(m: Manifest, sources: list[str] | None = None) -> dict[str, list[str]]:
    """Check every record; returns {utterance_id: [problems]} for flawed records only."""
    report: dict[str, list[str]] = {}
    seen: set[str] = set()
    for rec in m.records:
        problems = []
        if rec.utterance_id in seen:
            problems.append("duplicate utterance id")
        seen.add(rec.utterance_id)
        if not rec.transcript.strip():
            problems.append("empty transcript")
        if not m.resolve(rec.audio_path).is_file():
            problems.append("audio file absent")
        if sources is not None and len(rec.feature_paths) != len(sources):
            problems.append(f"expected {len(sources)} feature paths, found {len(rec.feature_paths)}")
        for k, fp in enumerate(rec.feature_paths):
            tag = sources[k] if sources is not None and k < len(sources) else "synthetic"
            full = m.resolve(fp)
            if not full.is_file():
                problems.append("feature file absent")
                continue
            try:
                frames = decode_features(full.read_bytes())
            except FormatError as exc:
                problems.append(f"unreadable feature file: {exc}")
                continue
            try:
                want = expected_dim(tag)
            except ValueError as exc:
                problems.append(str(exc))
                continue
            if want is not None and frames.shape[1] != want:
                problems.append(f"dimension mismatch (expected {want})")
        if problems:
            report[rec.utterance_id] = problems
    return report
