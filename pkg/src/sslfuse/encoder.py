"""Convolutional subsampling and the conformer encoder stack."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .fusion import FusedSequence, FusionLayer, FusionMode
from .nn import FeedForward, LayerNorm, Linear, Module, MultiHeadAttention, sinusoidal_positions
from .tensor import ShapeError, Tensor


class InputError(ValueError):
    pass


def subsampled_length(t: int) -> int:
    return t // 2


def conv_output_length_freq(n_mels: int) -> int:
    return T.conv_output_length(n_mels, 3, 2, 1)


class ConvSubsample(Module):
    """3x3 convolution with stride 2 in time and frequency, ReLU, flatten, linear to d.

    An odd trailing frame is dropped so the output length is ``T // 2``.
    """

    def __init__(self, n_mels: int, d: int, channels: int, rng, dtype=np.float64):
        self.n_mels = n_mels
        bound = 1.0 / 3.0
        self.conv_weight = Tensor(rng.uniform(-bound, bound, (channels, 1, 3, 3)).astype(dtype),
                                  requires_grad=True)
        self.conv_bias = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True)
        self.freq_out = conv_output_length_freq(n_mels)
        self.out = Linear(channels * self.freq_out, d, rng, dtype)

    def forward(self, u) -> Tensor:
        u = np.asarray(u.frames if hasattr(u, "frames") else u)
        n_t, n_f = u.shape
        if n_t < 4:
            raise InputError(f"need at least 4 fbank frames, got {n_t}")
        if n_f != self.n_mels:
            raise ShapeError(f"fbank width {n_f} != configured {self.n_mels}")
        x = Tensor(u.astype(self.conv_weight.dtype)[None])
        y = T.relu(T.conv2d(x, self.conv_weight, self.conv_bias, stride=2, padding=1))
        c, t_out, f_out = y.shape
        y = T.reshape(T.transpose(y, (1, 0, 2)), (t_out, c * f_out))
        keep = subsampled_length(n_t)
        if keep != t_out:
            y = y[:keep]
        return self.out(y)


class ConvModule(Module):
    """pointwise -> GLU -> depthwise -> norm -> swish -> pointwise."""

    def __init__(self, d: int, kernel: int, rng, dtype=np.float64):
        if kernel % 2 == 0:
            raise ValueError(f"depthwise kernel must be odd, got {kernel}")
        self.norm_in = LayerNorm(d, dtype)
        self.pointwise_in = Linear(d, 2 * d, rng, dtype)
        bound = 1.0 / np.sqrt(kernel)
        self.depthwise_weight = Tensor(rng.uniform(-bound, bound, (d, 1, kernel)).astype(dtype),
                                       requires_grad=True)
        self.depthwise_bias = Tensor(np.zeros(d, dtype=dtype), requires_grad=True)
        self.norm_mid = LayerNorm(d, dtype)
        self.pointwise_out = Linear(d, d, rng, dtype)
        self.kernel = kernel

    def forward(self, x: Tensor) -> Tensor:
        y = T.glu(self.pointwise_in(self.norm_in(x)), axis=-1)
        y = T.conv1d(T.transpose(y), self.depthwise_weight, self.depthwise_bias,
                     padding=self.kernel // 2, groups=y.shape[1])
        y = T.swish(self.norm_mid(T.transpose(y)))
        return self.pointwise_out(y)


class ConformerBlock(Module):
    def __init__(self, d: int, heads: int, ffn_expansion: int, kernel: int, rng, dtype=np.float64):
        self.ff1_norm = LayerNorm(d, dtype)
        self.ff1 = FeedForward(d, ffn_expansion * d, rng, dtype)
        self.att_norm = LayerNorm(d, dtype)
        self.att = MultiHeadAttention(d, heads, rng, dtype)
        self.conv = ConvModule(d, kernel, rng, dtype)
        self.ff2_norm = LayerNorm(d, dtype)
        self.ff2 = FeedForward(d, ffn_expansion * d, rng, dtype)
        self.out_norm = LayerNorm(d, dtype)

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != self.out_norm.gain.shape[0]:
            raise ShapeError(f"conformer block expects (L, {self.out_norm.gain.shape[0]}), got {x.shape}")
        x = x + 0.5 * self.ff1(self.ff1_norm(x))
        q = self.att_norm(x)
        x = x + self.att(q, q, q)[0]
        x = x + self.conv(x)
        x = x + 0.5 * self.ff2(self.ff2_norm(x))
        return self.out_norm(x)


def conformer_block(h_in: Tensor, params: ConformerBlock) -> Tensor:
    return params(h_in)


@dataclass
class EncoderOutput:
    h: Tensor
    attention: list[np.ndarray] | None


class ConformerEncoder(Module):
    """Subsampling, fusion, positional encoding, then ``layers`` conformer blocks.

    Each component draws its initial weights from its own seeded stream, so
    encoders that differ only in fusion mode share all other weights.
    """

    def __init__(self, n_mels: int, d: int, heads: int, layers: int, ffn_expansion: int,
                 kernel: int, subsample_channels: int, mode: FusionMode, ssl_dims: list[int],
                 seed: int, dtype=np.float64, s_v: int = 2):
        self.subsample = ConvSubsample(n_mels, d, subsample_channels,
                                       np.random.default_rng([seed, 1]), dtype)
        block_rng = np.random.default_rng([seed, 2])
        self.blocks = [ConformerBlock(d, heads, ffn_expansion, kernel, block_rng, dtype)
                       for _ in range(layers)]
        self.fusion = FusionLayer(mode, d, ssl_dims, heads, np.random.default_rng([seed, 3]), dtype, s_v)
        self.d = d
        self.dtype = dtype

    def fuse(self, u, ssl: list | None) -> FusedSequence:
        u_hat = self.subsample(u)
        return self.fusion(u_hat, ssl or [])

    def forward(self, u, ssl: list | None = None) -> EncoderOutput:
        fused = self.fuse(u, ssl)
        x = fused.frames
        x = x + sinusoidal_positions(x.shape[0], self.d, self.dtype)
        for block in self.blocks:
            x = block(x)
        return EncoderOutput(x, fused.attention)


def encode(u, v, encoder: ConformerEncoder) -> EncoderOutput:
    ssl = [] if v is None else (list(v) if isinstance(v, (list, tuple)) else [v])
    ssl = [s.frames if hasattr(s, "frames") else s for s in ssl]
    return encoder(u, ssl)
