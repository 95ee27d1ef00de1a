"""Independent reference implementations used as test oracles.

Nothing here imports the code under test except for plain data types, so a
bug in the package cannot leak into the expected values.
"""
from __future__ import annotations

import itertools

import numpy as np


def ctc_collapse(path, blank=0):
    out, prev = [], None
    for s in path:
        if s != prev and s != blank:
            out.append(s)
        prev = s
    return out


def ctc_brute_force_nll(log_probs: np.ndarray, labels, blank=0) -> float:
    """-log of the summed probability of every frame path collapsing to ``labels``."""
    t, v = log_probs.shape
    probs = np.exp(log_probs)
    total = 0.0
    for path in itertools.product(range(v), repeat=t):
        if ctc_collapse(path, blank) == list(labels):
            total += np.prod(probs[np.arange(t), path])
    return -np.log(total) if total > 0 else np.inf


def sfa_gather_add(u_hat: np.ndarray, v_hat: np.ndarray, s_v: int) -> np.ndarray:
    """Loop-based SFA: row i (1-based) adds SSL row min(T', s_v * i)."""
    out = np.empty_like(u_hat)
    for i in range(1, u_hat.shape[0] + 1):
        j = min(v_hat.shape[0], s_v * i)
        out[i - 1] = u_hat[i - 1] + v_hat[j - 1]
    return out


def levenshtein(ref, hyp) -> int:
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, 1):
        cur = [i]
        for j, h in enumerate(hyp, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h)))
        prev = cur
    return prev[-1]


def central_difference(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Elementwise central differences of scalar ``f`` at array ``x`` (modified in place, restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def rel_err(num: np.ndarray, ana: np.ndarray, floor: float = 1e-4) -> float:
    """Worst absolute deviation over the tensor's gradient scale.

    The floor keeps analytically-zero gradients (the attention key bias under
    softmax shift invariance) from dividing finite-difference noise by ~0.
    """
    return float(np.max(np.abs(num - ana)) / max(np.max(np.abs(num)), floor))
