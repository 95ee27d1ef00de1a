"""Word error rate via unit-cost Levenshtein alignment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels


@dataclass
class WerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def rate(self) -> float:
        return self.errors / self.ref_words if self.ref_words else 0.0


def normalize(text: str) -> list[str]:
    return text.lower().split()


def align(ref: list[str], hyp: list[str]) -> tuple[int, int, int]:
    """(S, D, I) of a minimum-cost alignment, preferring substitutions on ties."""
    vocab: dict[str, int] = {}
    r = np.array([vocab.setdefault(w, len(vocab)) for w in ref], dtype=np.int64)
    h = np.array([vocab.setdefault(w, len(vocab)) for w in hyp], dtype=np.int64)
    table = kernels.edit_table(r, h)
    i, j = len(r), len(h)
    s = d = n_ins = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and table[i, j] == table[i - 1, j - 1] + (r[i - 1] != h[j - 1]):
            s += int(r[i - 1] != h[j - 1])
            i, j = i - 1, j - 1
        elif i > 0 and table[i, j] == table[i - 1, j] + 1:
            d += 1
            i -= 1
        else:
            n_ins += 1
            j -= 1
    return s, d, n_ins


def wer(reference: str, hypothesis: str) -> WerBreakdown:
    ref = normalize(reference)
    if not ref:
        raise ValueError("reference is empty after normalisation")
    s, d, i = align(ref, normalize(hypothesis))
    return WerBreakdown(s, d, i, len(ref))


def corpus_wer(pairs) -> tuple[float, list[WerBreakdown]]:
    """Total errors over total reference words for (reference, hypothesis) pairs."""
    parts = [wer(r, h) for r, h in pairs]
    words = sum(p.ref_words for p in parts)
    return sum(p.errors for p in parts) / words, parts
