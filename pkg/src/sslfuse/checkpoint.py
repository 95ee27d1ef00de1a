"""Single-file checkpoints.

Layout (little-endian)::

    4s   magic b"SFCK"
    u16  version (1)
    u16  reserved, zero
    u32  length of the JSON metadata block
    ...  UTF-8 JSON metadata (sorted keys)
    then, for each blob in metadata order:
    u16  name length, name bytes (UTF-8)
    u8   ndim, then ndim x u32 extents
    ...  float32 values, row-major

Metadata holds the model config, its fingerprint, the training counters and
the blob order. Blobs are the model parameters followed by Adam moments
(``adam.m/<name>`` and ``adam.v/<name>``).
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_UMASK = os.umask(0)
os.umask(_UMASK)

MAGIC = b"SFCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: dict
    fingerprint: str
    params: dict[str, np.ndarray]
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    epoch: int = 0
    extra: dict = field(default_factory=dict)


def _blob(name: str, arr: np.ndarray) -> bytes:
    raw = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def dumps(ckpt: Checkpoint) -> bytes:
    names = list(ckpt.params) + list(ckpt.optimizer)
    meta = {
        "config": ckpt.config,
        "fingerprint": ckpt.fingerprint,
        "step": ckpt.step,
        "epoch": ckpt.epoch,
        "extra": ckpt.extra,
        "params": list(ckpt.params),
        "optimizer": list(ckpt.optimizer),
    }
    meta_raw = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [struct.pack("<4sHHI", MAGIC, VERSION, 0, len(meta_raw)), meta_raw]
    blobs = {**ckpt.params, **ckpt.optimizer}
    parts.extend(_blob(n, blobs[n]) for n in names)
    return b"".join(parts)


def loads(data: bytes) -> Checkpoint:
    if len(data) < 12:
        raise CheckpointError("truncated checkpoint header")
    magic, version, _, meta_len = struct.unpack_from("<4sHHI", data)
    if magic != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    meta = json.loads(data[pos:pos + meta_len].decode("utf-8"))
    pos += meta_len
    blobs = {}
    try:
        for expected in meta["params"] + meta["optimizer"]:
            (n,) = struct.unpack_from("<H", data, pos)
            name = data[pos + 2:pos + 2 + n].decode("utf-8")
            pos += 2 + n
            if name != expected:
                raise CheckpointError(f"blob order mismatch: {name!r} where {expected!r} expected")
            (ndim,) = struct.unpack_from("<B", data, pos)
            shape = struct.unpack_from(f"<{ndim}I", data, pos + 1)
            pos += 1 + 4 * ndim
            count = int(np.prod(shape, dtype=np.int64))
            if pos + 4 * count > len(data):
                raise CheckpointError(f"truncated blob {name!r}")
            blobs[name] = np.frombuffer(data, dtype="<f4", count=count, offset=pos).reshape(shape).copy()
            pos += 4 * count
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after last blob")
    return Checkpoint(meta["config"], meta["fingerprint"],
                      {n: blobs[n] for n in meta["params"]},
                      {n: blobs[n] for n in meta["optimizer"]},
                      meta["step"], meta["epoch"], meta.get("extra", {}))


def save(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "wb") as fh:
        fh.write(dumps(ckpt))
    os.chmod(tmp, 0o666 & ~_UMASK)
    os.replace(tmp, path)


def load(path: str | Path, expected_fingerprint: str | None = None) -> Checkpoint:
    ckpt = loads(Path(path).read_bytes())
    if expected_fingerprint is not None and ckpt.fingerprint != expected_fingerprint:
        raise CheckpointError(f"config fingerprint {ckpt.fingerprint} does not match "
                              f"expected {expected_fingerprint}")
    return ckpt
