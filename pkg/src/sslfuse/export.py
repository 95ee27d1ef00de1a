"""Attention-matrix CSV export and parsing.

First line: ``utterance_id,L_sub,T_prime,source_tag`` with values; then one
row per query frame, one column per key frame.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class AttentionMap:
    utterance_id: str
    source_tag: str
    weights: np.ndarray


def dumps_attention(amap: AttentionMap) -> str:
    l_sub, t_prime = amap.weights.shape
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([amap.utterance_id, l_sub, t_prime, amap.source_tag])
    for row in np.asarray(amap.weights, dtype=np.float32):
        writer.writerow([f"{x:.9g}" for x in row])
    return buf.getvalue()


def loads_attention(text: str) -> AttentionMap:
    rows = list(csv.reader(io.StringIO(text)))
    uid, l_sub, t_prime, tag = rows[0]
    weights = np.array([[float(x) for x in r] for r in rows[1:]], dtype=np.float32)
    if weights.shape != (int(l_sub), int(t_prime)):
        raise ValueError(f"attention body {weights.shape} disagrees with header ({l_sub}, {t_prime})")
    return AttentionMap(uid, tag, weights)


def write_attention_csv(amap: AttentionMap, path: str | Path) -> None:
    Path(path).write_text(dumps_attention(amap), encoding="utf-8")


def read_attention_csv(path: str | Path) -> AttentionMap:
    return loads_attention(Path(path).read_text(encoding="utf-8"))


def monotone_fraction(weights: np.ndarray) -> float:
    """Share of rows whose argmax column is >= the previous row's (first row counts)."""
    arg = np.asarray(weights).argmax(axis=1)
    if arg.size == 0:
        return 1.0
    return (1 + int(np.sum(np.diff(arg) >= 0))) / arg.size
