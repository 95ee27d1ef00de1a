"""Deterministic toy corpus: one sinusoid frequency per character."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .frontend import Waveform, read_wav, write_wav
from .sslcache import Manifest, SynthConfig, UtteranceRecord, synth_features, write_features, write_manifest

ALPHABET = "abcdefgh"
SEGMENT_SECONDS = 0.1
SAMPLE_RATE = 16000
TOY_SOURCES = ("synthetic-a", "synthetic-b")
TOY_SSL_DIM = 64


def token_frequencies(alphabet: str = ALPHABET) -> dict[str, float]:
    freqs = np.geomspace(300.0, 3000.0, len(alphabet))
    return dict(zip(alphabet, freqs))


def _tones(text: str, rng: np.random.Generator, amplitude: float, sample_rate: int) -> np.ndarray:
    freqs = token_frequencies()
    n = int(SEGMENT_SECONDS * sample_rate)
    t = np.arange(n) / sample_rate
    ramp = np.minimum(1.0, np.minimum(np.arange(n), np.arange(n)[::-1]) / 80.0)
    return np.concatenate([amplitude * ramp * np.sin(2 * np.pi * freqs[c] * t + rng.uniform(0, 2 * np.pi))
                           for c in text])


def synth_utterance(text: str, rng: np.random.Generator, interference: float = 0.0,
                    sample_rate: int = SAMPLE_RATE) -> tuple[np.ndarray, np.ndarray]:
    """(clean, observed) signals; ``observed`` adds a random interfering tone sequence and noise."""
    clean = _tones(text, rng, 0.5, sample_rate)
    other = "".join(rng.choice(list(ALPHABET), size=len(text)))
    observed = clean + _tones(other, rng, interference, sample_rate) if interference else clean.copy()
    return clean, observed + 0.01 * rng.standard_normal(clean.size)


def toy_synth_config(source_index: int, seed: int) -> SynthConfig:
    return SynthConfig(stride=320, dim=TOY_SSL_DIM, seed=seed * 100 + source_index,
                       noise_scale=0.3, content_scale=1.0, source_tag=TOY_SOURCES[source_index])


def _write_split(out: Path, name: str, rng: np.random.Generator, count: int, seed: int,
                 n_sources: int, interference: float) -> Manifest:
    records = []
    for k in range(count):
        uid = f"{name}{k:03d}"
        length = int(rng.integers(3, 7))
        text = "".join(rng.choice(list(ALPHABET), size=length))
        wav_rel = f"wav/{uid}.wav"
        clean, observed = synth_utterance(text, rng, interference)
        write_wav(out / wav_rel, Waveform(observed, SAMPLE_RATE))
        samples = read_wav(out / wav_rel).samples
        feats = []
        for s in range(n_sources):
            cfg = toy_synth_config(s, seed)
            rel = f"feats/{cfg.source_tag}/{uid}.ssf"
            write_features(synth_features(uid, samples.size, cfg, clean), out / rel)
            feats.append(rel)
        records.append(UtteranceRecord(uid, wav_rel, text, feats))
    manifest = Manifest(records, out)
    write_manifest(manifest, out / f"{name}.tsv")
    return manifest


def gen_toy_corpus(seed: int, out_dir: str | Path, n_train: int = 20, n_dev: int = 20,
                   n_sources: int = 2, interference: float = 0.45) -> dict[str, Manifest]:
    """Write WAVs, SSF1 features and ``train.tsv``/``dev.tsv`` manifests under ``out_dir``."""
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    for s in range(n_sources):
        (out / "feats" / TOY_SOURCES[s]).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    return {
        "train": _write_split(out, "train", rng, n_train, seed, n_sources, interference),
        "dev": _write_split(out, "dev", rng, n_dev, seed, n_sources, interference),
    }
