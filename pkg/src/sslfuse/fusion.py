"""Fusion of subsampled fbank frames with projected SSL frames.

Two mechanisms produce the encoder input ``h0`` from the subsampled fbank
sequence ``u_hat`` (L_sub x d) and the projected SSL sequence ``v_hat``
(T' x d):

* subsampled framewise addition (SFA): ``h0[i] = u_hat[i] + v_hat[min(T', s*i)]``
  with 1-based ``i``; it has no parameters of its own.
* cross attention (CA): ``h0 = u_hat + MHA(u_hat, v_hat, v_hat)``, optionally
  summed over several SSL sources.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .nn import LayerNorm, Linear, Module, MultiHeadAttention
from .tensor import ShapeError, Tensor


class FusionMode(str, enum.Enum):
    NONE = "none"
    SFA = "sfa"
    CA = "ca"
    MULTI_CA = "multi-ca"


class ConfigError(ValueError):
    pass


@dataclass
class FusedSequence:
    frames: Tensor
    attention: list[np.ndarray] | None = None


class SSLProjection(Module):
    """Linear d' -> d followed by layer normalisation over d."""

    def __init__(self, d_ssl: int, d: int, rng, dtype=np.float64):
        self.linear = Linear(d_ssl, d, rng, dtype)
        self.norm = LayerNorm(d, dtype)

    def forward(self, v) -> Tensor:
        v = v if isinstance(v, Tensor) else Tensor(np.asarray(v, dtype=self.linear.weight.dtype))
        if v.ndim != 2 or v.shape[1] != self.linear.weight.shape[1]:
            raise ShapeError(f"SSL features {v.shape} do not match projection input width "
                             f"{self.linear.weight.shape[1]}")
        return self.norm(self.linear(v))


def project_ssl(v, params: SSLProjection) -> Tensor:
    return params(v)


def sfa_indices(l_sub: int, t_prime: int, s_v: int) -> np.ndarray:
    """0-based SSL frame index paired with each subsampled frame."""
    i = np.arange(1, l_sub + 1)
    return np.minimum(t_prime, s_v * i) - 1


def fuse_sfa(u_hat: Tensor, v_hat: Tensor, s_v: int = 2) -> FusedSequence:
    if v_hat.shape[0] == 0:
        raise ValueError("SFA needs a non-empty SSL sequence")
    if s_v < 1:
        raise ConfigError(f"SSL subsample factor must be >= 1, got {s_v}")
    if u_hat.shape[1] != v_hat.shape[1]:
        raise ShapeError(f"SFA width mismatch: {u_hat.shape} vs {v_hat.shape}")
    idx = sfa_indices(u_hat.shape[0], v_hat.shape[0], s_v)
    return FusedSequence(u_hat + T.take(v_hat, idx))


class CrossAttentionFusion(Module):
    def __init__(self, d: int, heads: int, rng, dtype=np.float64):
        if d % heads:
            raise ConfigError(f"width {d} not divisible by {heads} heads")
        self.attn = MultiHeadAttention(d, heads, rng, dtype)

    def attend(self, u_hat: Tensor, v_hat: Tensor) -> tuple[Tensor, np.ndarray]:
        if u_hat.shape[1] != v_hat.shape[1]:
            raise ConfigError(f"CA width mismatch: {u_hat.shape} vs {v_hat.shape}")
        out, weights = self.attn(u_hat, v_hat, v_hat)
        return out, weights.mean(axis=0)

    def forward(self, u_hat: Tensor, v_hat: Tensor) -> FusedSequence:
        out, attn = self.attend(u_hat, v_hat)
        return FusedSequence(u_hat + out, [attn])


def fuse_ca(u_hat: Tensor, v_hat: Tensor, params: CrossAttentionFusion) -> FusedSequence:
    return params(u_hat, v_hat)


def fuse_multi_ca(u_hat: Tensor, v_hats: list[Tensor], params: list[CrossAttentionFusion],
                  allow_single: bool = False) -> FusedSequence:
    if len(v_hats) != len(params):
        raise ConfigError(f"{len(v_hats)} SSL sources but {len(params)} attention blocks")
    if len(v_hats) < 2 and not allow_single:
        raise ConfigError("multi-source cross attention needs at least 2 sources")
    total = None
    maps = []
    for v_hat, block in zip(v_hats, params):
        out, attn = block.attend(u_hat, v_hat)
        total = out if total is None else total + out
        maps.append(attn)
    return FusedSequence(u_hat + total, maps)


class FusionLayer(Module):
    """Per-source projections plus the configured fusion operator."""

    def __init__(self, mode: FusionMode, d: int, ssl_dims: list[int], heads: int, rng,
                 dtype=np.float64, s_v: int = 2):
        mode = FusionMode(mode)
        self.mode = mode
        self.s_v = s_v
        if mode is FusionMode.NONE:
            ssl_dims = []
        elif mode in (FusionMode.SFA, FusionMode.CA) and len(ssl_dims) != 1:
            raise ConfigError(f"{mode.value} fusion takes exactly one SSL source, got {len(ssl_dims)}")
        elif mode is FusionMode.MULTI_CA and len(ssl_dims) < 2:
            raise ConfigError("multi-ca fusion needs at least 2 SSL sources")
        if s_v < 1:
            raise ConfigError(f"SSL subsample factor must be >= 1, got {s_v}")
        if d % heads:
            raise ConfigError(f"width {d} not divisible by {heads} heads")
        self.projections = [SSLProjection(dim, d, rng, dtype) for dim in ssl_dims]
        if mode in (FusionMode.CA, FusionMode.MULTI_CA):
            self.cross = [CrossAttentionFusion(d, heads, rng, dtype) for _ in ssl_dims]
        else:
            self.cross = []

    def forward(self, u_hat: Tensor, ssl: list) -> FusedSequence:
        if self.mode is FusionMode.NONE:
            return FusedSequence(u_hat)
        if len(ssl) != len(self.projections):
            raise ConfigError(f"expected {len(self.projections)} SSL sources, got {len(ssl)}")
        v_hats = [proj(v) for proj, v in zip(self.projections, ssl)]
        if self.mode is FusionMode.SFA:
            return fuse_sfa(u_hat, v_hats[0], self.s_v)
        if self.mode is FusionMode.CA:
            return fuse_ca(u_hat, v_hats[0], self.cross[0])
        return fuse_multi_ca(u_hat, v_hats, self.cross)
