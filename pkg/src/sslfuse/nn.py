"""Parameter containers and the layers shared by encoder, fusion and decoders."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    """Attribute-registered parameter tree.

    Parameters are ``Tensor`` attributes with ``requires_grad``; child
    modules are ``Module`` attributes or lists of them. Registration order is
    attribute assignment order, which keeps parameter naming stable.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in self.__dict__.items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def param(rng: np.random.Generator, shape, scale: float, dtype) -> Tensor:
    return Tensor(rng.uniform(-scale, scale, size=shape).astype(dtype), requires_grad=True)


def zeros(shape, dtype) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


def ones(shape, dtype) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=True)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, dtype=np.float64):
        bound = 1.0 / math.sqrt(d_in)
        self.weight = param(rng, (d_out, d_in), bound, dtype)
        self.bias = zeros((d_out,), dtype)

    def forward(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)


class LayerNorm(Module):
    def __init__(self, d: int, dtype=np.float64, eps: float = 1e-5):
        self.gain = ones((d,), dtype)
        self.bias = zeros((d,), dtype)
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias, self.eps)


class FeedForward(Module):
    def __init__(self, d: int, hidden: int, rng, dtype=np.float64, activation: str = "swish"):
        self.w1 = Linear(d, hidden, rng, dtype)
        self.w2 = Linear(hidden, d, rng, dtype)
        self.activation = activation

    def forward(self, x: Tensor) -> Tensor:
        act = T.swish if self.activation == "swish" else T.relu
        return self.w2(act(self.w1(x)))


class MultiHeadAttention(Module):
    """Scaled dot-product attention with separate Q/K/V/O projections.

    ``forward`` returns the attended output (L_q, d) and the per-head
    weights (heads, L_q, L_k) as a plain array.
    """

    def __init__(self, d: int, heads: int, rng, dtype=np.float64):
        if d % heads:
            raise ValueError(f"model width {d} not divisible by {heads} heads")
        self.heads = heads
        self.q = Linear(d, d, rng, dtype)
        self.k = Linear(d, d, rng, dtype)
        self.v = Linear(d, d, rng, dtype)
        self.o = Linear(d, d, rng, dtype)

    def _split(self, x: Tensor) -> Tensor:
        n, d = x.shape
        return T.transpose(T.reshape(x, (n, self.heads, d // self.heads)), (1, 0, 2))

    def forward(self, query: Tensor, key: Tensor, value: Tensor, mask: np.ndarray | None = None):
        if key.shape[0] != value.shape[0]:
            raise T.ShapeError(f"attention: key length {key.shape[0]} != value length {value.shape[0]}")
        n_q, d = query.shape
        dh = d // self.heads
        q = self._split(self.q(query))
        k = self._split(self.k(key))
        v = self._split(self.v(value))
        scores = T.matmul(q, T.transpose(k, (0, 2, 1))) * (1.0 / math.sqrt(dh))
        if mask is not None:
            # mask: True where attention is forbidden
            scores = scores + np.where(mask, -1e30, 0.0).astype(scores.dtype)
        weights = T.softmax(scores, axis=-1)
        ctx = T.matmul(weights, v)  # (H, L_q, dh)
        ctx = T.reshape(T.transpose(ctx, (1, 0, 2)), (n_q, d))
        return self.o(ctx), weights.data


def sinusoidal_positions(n: int, d: int, dtype=np.float64) -> np.ndarray:
    pos = np.arange(n, dtype=np.float64)[:, None]
    i = np.arange(0, d, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / d)
    pe = np.zeros((n, d))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : d // 2])
    return pe.astype(dtype)
