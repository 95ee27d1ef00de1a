"""Regenerate the committed golden fixtures.

    python tests/fixtures/generate.py [out_dir]

Expected values come from the oracles in tests/oracles.py or from hand
arithmetic, never from the package code they are used to check. Running the
script twice yields byte-identical files.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from oracles import ctc_brute_force_nll, sfa_gather_add  # noqa: E402

SEED = 20240607


def _mel_centers(n_mels=80, sample_rate=16000):
    top = 2595.0 * math.log10(1 + sample_rate / 2 / 700)
    mels = np.linspace(0, top, n_mels + 2)[1:-1]
    return 700 * (10 ** (mels / 2595) - 1)


def golden_cases() -> list[dict]:
    r = np.random.default_rng(SEED)
    x = r.standard_normal((5, 4))
    lp = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
    u = [[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]]
    v = [[0.1 * k] * 2 for k in range(1, 7)]
    return [
        {"name": "ctc_worked_example", "inputs": {"log_probs": np.log(np.full((2, 2), 0.5)).tolist(), "labels": [1]},
         "expected": -math.log(0.75), "tolerance": 1e-12},
        {"name": "ctc_random_posteriors", "inputs": {"log_probs": lp.tolist(), "labels": [1, 2, 1]},
         "expected": float(ctc_brute_force_nll(lp, [1, 2, 1])), "tolerance": 1e-8},
        {"name": "ctc_empty_label", "inputs": {"log_probs": lp.tolist(), "labels": []},
         "expected": float(-lp[:, 0].sum()), "tolerance": 1e-12},
        {"name": "sfa_example", "inputs": {"u_hat": u, "v_hat": v, "s_v": 2},
         "expected": sfa_gather_add(np.array(u), np.array(v), 2).tolist(), "tolerance": 1e-15},
        {"name": "sfa_clamp_indices", "inputs": {"l_sub": 3, "t_prime": 5, "s_v": 2},
         "expected": [min(5, 2 * i) for i in (1, 2, 3)], "tolerance": 0},
        {"name": "projection_params", "inputs": {"d_ssl": 768, "d": 256},
         "expected": 768 * 256 + 256 + 2 * 256, "tolerance": 0},
        {"name": "ca_fusion_delta", "inputs": {"d_ssl": 768, "d": 256, "heads": 4},
         "expected": 4 * (256 * 256 + 256) + 768 * 256 + 256 + 2 * 256, "tolerance": 0},
        {"name": "noam_peak", "inputs": {"step": 25000, "noam_scale": 1.0, "d": 256, "warmup": 25000},
         "expected": 256 ** -0.5 * 25000 ** -0.5, "tolerance": 1e-15},
        {"name": "adam_single_step", "inputs": {"g": 1.0, "lr": 0.1, "betas": [0.9, 0.999], "eps": 1e-8},
         "expected": -0.1 / (1 + 1e-8), "tolerance": 1e-12},
        {"name": "fbank_frames_one_second", "inputs": {"samples": 16000, "window": 400, "hop": 160},
         "expected": 1 + (16000 - 400) // 160, "tolerance": 0},
        {"name": "fbank_440hz_bin", "inputs": {"freq": 440.0, "seconds": 1.0},
         "expected": int(np.argmin(np.abs(_mel_centers() - 440.0))), "tolerance": 0},
        {"name": "ssl_frames_one_second", "inputs": {"samples": 16000, "stride": 320},
         "expected": 16000 // 320, "tolerance": 0},
        {"name": "subsample_lengths", "inputs": {"frames": [10, 9]}, "expected": [5, 4], "tolerance": 0},
        {"name": "speed_perturb_length", "inputs": {"samples": 900, "factor": 0.9},
         "expected": 1000, "tolerance": 0},
        {"name": "ssf1_file_size", "inputs": {"frames": 2, "dim": 3}, "expected": 32 + 4 * 2 * 3, "tolerance": 0},
        {"name": "wer_examples", "inputs": {"pairs": [["a b c", "a b c"], ["a b c", "a x c"], ["a", "a b"]]},
         "expected": [0.0, 1 / 3, 1.0], "tolerance": 1e-12},
    ]


def generate(out: Path) -> None:
    from sslfuse.corpus import gen_toy_corpus
    from sslfuse.sslcache import SSLSequence, write_features

    out.mkdir(parents=True, exist_ok=True)
    sample = np.array([[1.5, -0.0, 2.0], [np.float32(1e-45), -3.25, 1e30]], dtype=np.float32)
    write_features(SSLSequence(sample), out / "sample_2x3.ssf")
    (out / "sample_2x3.json").write_text(json.dumps({"frames": [[float(x) for x in row] for row in sample]}) + "\n")
    gen_toy_corpus(SEED % 1000, out / "mini_corpus", n_train=2, n_dev=1)
    (out / "golden.json").write_text(json.dumps(golden_cases(), indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    generate(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE)
