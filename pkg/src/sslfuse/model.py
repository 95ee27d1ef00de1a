"""Full model: encoder with fusion, CTC head and attention decoder."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .decoders import (AttentionDecoder, CTCHead, TokenSequence, Vocabulary, att_decoder_loss,
                       att_greedy_decode, ctc_greedy_decode, ctc_nll, joint_loss)
from .encoder import ConformerEncoder, EncoderOutput, conv_output_length_freq
from .fusion import FusionMode
from .nn import Module
from .sslcache import expected_dim
from .tensor import Tensor


@dataclass
class ModelConfig:
    n_mels: int = 80
    d: int = 256
    heads: int = 4
    enc_layers: int = 12
    dec_layers: int = 6
    ffn_expansion: int = 4
    kernel: int = 15
    subsample_channels: int = 32
    mode: str = "none"
    ssl_sources: list[str] = field(default_factory=lambda: ["hubert-base"])
    ssl_dims: list[int] | None = None
    s_v: int = 2
    ctc_weight: float = 0.3
    label_smoothing: float = 0.1
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.mode = FusionMode(self.mode).value
        if self.d % self.heads:
            raise ValueError(f"d={self.d} not divisible by heads={self.heads}")
        if self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd, got {self.kernel}")
        if self.ssl_dims is None:
            dims = []
            for tag in self.ssl_sources:
                dim = expected_dim(tag)
                if dim is None:
                    raise ValueError(f"synthetic source {tag!r} needs an explicit ssl_dims entry")
                dims.append(dim)
            self.ssl_dims = dims
        if len(self.ssl_dims) != len(self.ssl_sources):
            raise ValueError("ssl_dims and ssl_sources differ in length")

    @property
    def fusion_sources(self) -> list[str]:
        return [] if self.mode == "none" else list(self.ssl_sources)

    @property
    def fusion_dims(self) -> list[int]:
        return [] if self.mode == "none" else list(self.ssl_dims)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def fingerprint(self) -> str:
        """Hash of everything that fixes parameter shapes and feature inputs."""
        keep = {k: v for k, v in self.to_dict().items() if k not in ("seed", "ctc_weight", "label_smoothing")}
        return hashlib.sha256(json.dumps(keep, sort_keys=True).encode()).hexdigest()[:16]


class ASRModel(Module):
    def __init__(self, cfg: ModelConfig, vocab: Vocabulary | None = None):
        self.cfg = cfg
        self.vocab = vocab or Vocabulary()
        dtype = np.dtype(cfg.dtype).type
        self.encoder = ConformerEncoder(cfg.n_mels, cfg.d, cfg.heads, cfg.enc_layers, cfg.ffn_expansion,
                                        cfg.kernel, cfg.subsample_channels, FusionMode(cfg.mode),
                                        cfg.fusion_dims, cfg.seed, dtype, cfg.s_v)
        self.ctc = CTCHead(cfg.d, len(self.vocab), np.random.default_rng([cfg.seed, 4]), dtype)
        self.decoder = AttentionDecoder(len(self.vocab), cfg.d, cfg.heads, cfg.dec_layers,
                                        cfg.ffn_expansion, np.random.default_rng([cfg.seed, 5]), dtype)

    def encode(self, fbank, ssl=None) -> EncoderOutput:
        ssl = [] if ssl is None else [s.frames if hasattr(s, "frames") else s for s in ssl]
        if self.cfg.mode == "none":
            ssl = []
        return self.encoder(fbank, ssl)

    def losses(self, fbank, ssl, tokens) -> tuple[Tensor, Tensor, Tensor]:
        """(joint, ctc, attention) losses of one utterance."""
        h = self.encode(fbank, ssl).h
        l_ctc = ctc_nll(self.ctc.log_probs(h), tokens, self.vocab.blank)
        l_att = att_decoder_loss(h, tokens, self.decoder, self.vocab, self.cfg.label_smoothing)
        return joint_loss(l_ctc, l_att, self.cfg.ctc_weight), l_ctc, l_att

    def decode(self, fbank, ssl=None, max_len: int = 200, method: str = "attention") -> TokenSequence:
        h = self.encode(fbank, ssl).h
        if method == "ctc":
            return ctc_greedy_decode(h, self.ctc, self.vocab)
        return att_greedy_decode(h, self.decoder, self.vocab, max_len)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        if set(own) != set(state):
            missing = sorted(set(own) - set(state))
            extra = sorted(set(state) - set(own))
            raise KeyError(f"parameter mismatch; missing={missing[:3]} unexpected={extra[:3]}")
        for name, p in own.items():
            if state[name].shape != p.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.shape}")
            p.data[...] = state[name]


# -- closed-form parameter accounting -----------------------------------------------
def _linear(n_in: int, n_out: int) -> int:
    return n_in * n_out + n_out


def _norm(d: int) -> int:
    return 2 * d


def _mha(d: int) -> int:
    return 4 * _linear(d, d)


def projection_params(d_ssl: int, d: int) -> int:
    return _linear(d_ssl, d) + _norm(d)


def conformer_layer_params(d: int, ffn_expansion: int, kernel: int) -> int:
    ffn = _norm(d) + _linear(d, ffn_expansion * d) + _linear(ffn_expansion * d, d)
    conv = _norm(d) + _linear(d, 2 * d) + d * kernel + d + _norm(d) + _linear(d, d)
    return 2 * ffn + _norm(d) + _mha(d) + conv + _norm(d)


def decoder_layer_params(d: int, ffn_expansion: int) -> int:
    ffn = _linear(d, ffn_expansion * d) + _linear(ffn_expansion * d, d)
    return 3 * _norm(d) + 2 * _mha(d) + ffn


def param_count(cfg: ModelConfig, vocab_size: int | None = None) -> dict[str, int]:
    """Per-component parameter counts derived from the configuration alone."""
    v = vocab_size if vocab_size is not None else len(Vocabulary())
    freq = conv_output_length_freq(cfg.n_mels)
    c = cfg.subsample_channels
    report = {
        "frontend_subsample": c * 9 + c + _linear(c * freq, cfg.d),
        "fusion": 0,
        "fusion_projection": 0,
        "fusion_attention": 0,
        "encoder_blocks": cfg.enc_layers * conformer_layer_params(cfg.d, cfg.ffn_expansion, cfg.kernel),
        "ctc_head": _linear(cfg.d, v),
        "decoder": v * cfg.d + cfg.dec_layers * decoder_layer_params(cfg.d, cfg.ffn_expansion)
                   + _norm(cfg.d) + _linear(cfg.d, v),
    }
    mode = FusionMode(cfg.mode)
    if mode is not FusionMode.NONE:
        report["fusion_projection"] = sum(projection_params(dim, cfg.d) for dim in cfg.ssl_dims)
    if mode in (FusionMode.CA, FusionMode.MULTI_CA):
        report["fusion_attention"] = len(cfg.ssl_dims) * _mha(cfg.d)
    report["fusion"] = report["fusion_projection"] + report["fusion_attention"]
    report["total"] = (report["frontend_subsample"] + report["fusion"] + report["encoder_blocks"]
                       + report["ctc_head"] + report["decoder"])
    return report
