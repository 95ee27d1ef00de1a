"""Waveform I/O, log-mel filterbank features and speed perturbation."""
from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InputError(ValueError):
    """Raised on audio that cannot be processed."""


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise InputError(f"sample rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise InputError("waveform must be a non-empty mono signal")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class FrontendConfig:
    sample_rate: int = 16000
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_mel_bins: int = 80
    preemphasis: float = 0.97
    log_floor: float = 1e-10
    n_fft: int | None = None

    @property
    def window(self) -> int:
        return int(round(self.sample_rate * self.frame_length_ms / 1000.0))

    @property
    def hop(self) -> int:
        return int(round(self.sample_rate * self.frame_shift_ms / 1000.0))

    @property
    def fft_size(self) -> int:
        if self.n_fft is not None:
            return self.n_fft
        return 1 << (self.window - 1).bit_length()


@dataclass
class FbankSequence:
    frames: np.ndarray
    frame_shift: float
    frame_length: float

    def __len__(self) -> int:
        return self.frames.shape[0]


def num_frames(num_samples: int, window: int, hop: int) -> int:
    if num_samples < window:
        return 0
    return 1 + (num_samples - window) // hop


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(num_mel_bins: int, sample_rate: int) -> np.ndarray:
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_mel_bins + 2))
    return edges[1:-1]


def mel_filterbank(num_mel_bins: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters on the HTK mel scale, shape (num_mel_bins, n_fft//2 + 1)."""
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), num_mel_bins + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def fbank(w: Waveform, cfg: FrontendConfig = FrontendConfig()) -> FbankSequence:
    """Log-mel energies: pre-emphasis, Hann window, |STFT|, mel filters, floored log."""
    window, hop = cfg.window, cfg.hop
    if len(w) <= window:
        raise InputError(f"waveform of {len(w)} samples is not longer than one {window}-sample window")
    x = w.samples
    x = np.concatenate([x[:1] * (1.0 - cfg.preemphasis), x[1:] - cfg.preemphasis * x[:-1]])
    n = num_frames(x.size, window, hop)
    frames = np.lib.stride_tricks.sliding_window_view(x, window)[::hop][:n]
    spec = np.abs(np.fft.rfft(frames * np.hanning(window + 2)[1:-1], n=cfg.fft_size, axis=1))
    mel = spec @ mel_filterbank(cfg.num_mel_bins, cfg.fft_size, w.sample_rate).T
    logmel = np.log(np.maximum(mel, cfg.log_floor))
    return FbankSequence(logmel, cfg.frame_shift_ms, cfg.frame_length_ms)


def speed_perturb(w: Waveform, factor: float) -> Waveform:
    """Resample by linear interpolation so playback runs ``factor`` times faster."""
    if not factor > 0:
        raise InputError(f"speed factor must be positive, got {factor}")
    if factor == 1.0:
        return Waveform(w.samples.copy(), w.sample_rate)
    n_out = int(round(len(w) / factor))
    pos = np.arange(n_out) * factor
    return Waveform(np.interp(pos, np.arange(len(w)), w.samples), w.sample_rate)


def read_wav(path: str | Path) -> Waveform:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
            raise InputError(f"{path}: only mono 16-bit PCM is supported")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(path: str | Path, w: Waveform) -> None:
    pcm = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(w.sample_rate)
        fh.writeframes(pcm.tobytes())
