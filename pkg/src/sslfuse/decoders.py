"""CTC and attention prediction heads, the joint objective and greedy decoding."""
from __future__ import annotations

import math
import string
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import tensor as T
from .nn import FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, sinusoidal_positions
from .tensor import Tensor


class LengthError(ValueError):
    """The label sequence cannot be aligned to the available frames."""


class ConfigError(ValueError):
    pass


class Vocabulary:
    """Character vocabulary: blank=0, shared sos/eos=1, space, a-z, apostrophe."""

    BLANK = "<blank>"
    SOS_EOS = "<sos/eos>"

    def __init__(self, symbols: list[str] | None = None):
        if symbols is None:
            symbols = [self.BLANK, self.SOS_EOS, " ", *string.ascii_lowercase, "'"]
        if len(set(symbols)) != len(symbols):
            raise ValueError("vocabulary symbols must be unique")
        self.symbols = list(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}
        self.blank = self.index[self.BLANK]
        self.sos = self.eos = self.index[self.SOS_EOS]

    def __len__(self) -> int:
        return len(self.symbols)

    def encode(self, text: str) -> list[int]:
        try:
            return [self.index[c] for c in text.lower()]
        except KeyError as exc:
            raise ValueError(f"character {exc.args[0]!r} not in vocabulary") from None

    def decode(self, ids) -> str:
        return "".join(self.symbols[i] for i in ids if i not in (self.blank, self.sos))


@dataclass
class TokenSequence:
    tokens: list[int]
    text: str = ""


# -- CTC -----------------------------------------------------------------------
def min_ctc_frames(labels) -> int:
    """Frames needed for ``labels``: one per label plus a blank between repeats."""
    labels = list(labels)
    return len(labels) + sum(a == b for a, b in zip(labels, labels[1:]))


def ctc_nll(log_probs: Tensor, labels, blank: int = 0) -> Tensor:
    """-log p(labels | frame log-probabilities) as a differentiable scalar."""
    labels = np.asarray(labels, dtype=np.int64)
    if min_ctc_frames(labels) > log_probs.shape[0]:
        raise LengthError(f"{len(labels)} labels need {min_ctc_frames(labels)} frames, "
                          f"only {log_probs.shape[0]} available")
    nll, grad = kernels.ctc_forward_backward(log_probs.data.astype(np.float64), labels, blank)
    grad = grad.astype(log_probs.dtype)
    return T._make(np.asarray(nll, dtype=log_probs.dtype), (log_probs,), lambda g: (g * grad,))


class CTCHead(Module):
    def __init__(self, d: int, vocab_size: int, rng, dtype=np.float64):
        self.proj = Linear(d, vocab_size, rng, dtype)

    def log_probs(self, h: Tensor) -> Tensor:
        return T.log_softmax(self.proj(h), axis=-1)


def ctc_log_likelihood(h: Tensor, y, params: CTCHead, blank: int = 0) -> Tensor:
    """CTC loss (negative log-likelihood) of token ids ``y`` given encoder output ``h``."""
    tokens = y.tokens if isinstance(y, TokenSequence) else y
    return ctc_nll(params.log_probs(h), tokens, blank)


def collapse(frame_ids, blank: int = 0) -> list[int]:
    out, prev = [], None
    for k in frame_ids:
        k = int(k)
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return out


def ctc_greedy_decode(h: Tensor, params: CTCHead, vocab: Vocabulary | None = None) -> TokenSequence:
    ids = collapse(params.log_probs(h).data.argmax(axis=-1), vocab.blank if vocab else 0)
    return TokenSequence(ids, vocab.decode(ids) if vocab else "")


# -- attention decoder ---------------------------------------------------------
class DecoderLayer(Module):
    def __init__(self, d: int, heads: int, ffn_expansion: int, rng, dtype=np.float64):
        self.self_norm = LayerNorm(d, dtype)
        self.self_att = MultiHeadAttention(d, heads, rng, dtype)
        self.src_norm = LayerNorm(d, dtype)
        self.src_att = MultiHeadAttention(d, heads, rng, dtype)
        self.ff_norm = LayerNorm(d, dtype)
        self.ff = FeedForward(d, ffn_expansion * d, rng, dtype, activation="relu")

    def forward(self, x: Tensor, memory: Tensor, causal: np.ndarray) -> Tensor:
        q = self.self_norm(x)
        x = x + self.self_att(q, q, q, mask=causal)[0]
        x = x + self.src_att(self.src_norm(x), memory, memory)[0]
        return x + self.ff(self.ff_norm(x))


class AttentionDecoder(Module):
    """Pre-norm transformer decoder over the encoder output."""

    def __init__(self, vocab_size: int, d: int, heads: int, layers: int, ffn_expansion: int,
                 rng, dtype=np.float64):
        self.embed = Tensor(rng.standard_normal((vocab_size, d)).astype(dtype) * d ** -0.5,
                            requires_grad=True)
        self.layers = [DecoderLayer(d, heads, ffn_expansion, rng, dtype) for _ in range(layers)]
        self.out_norm = LayerNorm(d, dtype)
        self.out = Linear(d, vocab_size, rng, dtype)
        self.d = d

    def logits(self, h: Tensor, tokens_in) -> Tensor:
        tokens_in = np.asarray(tokens_in, dtype=np.int64)
        n = tokens_in.size
        x = self.embed[tokens_in] * math.sqrt(self.d)
        x = x + sinusoidal_positions(n, self.d, self.embed.dtype)
        causal = np.triu(np.ones((n, n), dtype=bool), k=1)
        for layer in self.layers:
            x = layer(x, h, causal)
        return self.out(self.out_norm(x))


def smoothed_cross_entropy(logits: Tensor, targets, smoothing: float) -> Tensor:
    """Summed cross-entropy against (1-eps) one-hot plus eps spread over the other classes."""
    targets = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    q = np.full((n, v), smoothing / (v - 1) if v > 1 else 0.0)
    q[np.arange(n), targets] = 1.0 - smoothing
    return -T.tsum(T.log_softmax(logits, axis=-1) * q.astype(logits.dtype))


def att_decoder_loss(h: Tensor, y, params: AttentionDecoder, vocab: Vocabulary,
                     smoothing: float = 0.1) -> Tensor:
    tokens = list(y.tokens if isinstance(y, TokenSequence) else y)
    if not tokens:
        raise ValueError("attention loss needs a non-empty target")
    logits = params.logits(h, [vocab.sos] + tokens)
    return smoothed_cross_entropy(logits, tokens + [vocab.eos], smoothing)


def joint_loss(ctc: Tensor, att: Tensor, ctc_weight: float) -> Tensor:
    if not 0.0 <= ctc_weight <= 1.0:
        raise ConfigError(f"CTC weight must lie in [0, 1], got {ctc_weight}")
    return ctc * ctc_weight + att * (1.0 - ctc_weight)


def att_greedy_decode(h: Tensor, params: AttentionDecoder, vocab: Vocabulary, max_len: int) -> TokenSequence:
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    out: list[int] = []
    while len(out) < max_len:
        nxt = int(params.logits(h, [vocab.sos] + out).data[-1].argmax())
        if nxt == vocab.eos:
            break
        out.append(nxt)
    return TokenSequence(out, vocab.decode(out))
