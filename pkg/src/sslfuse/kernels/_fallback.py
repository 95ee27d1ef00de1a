"""Pure numpy implementations of the hot loops; reference for the compiled kernels."""
from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def extend_labels(labels: np.ndarray, blank: int) -> np.ndarray:
    ext = np.full(2 * len(labels) + 1, blank, dtype=np.int64)
    ext[1::2] = labels
    return ext


def _skip_mask(ext: np.ndarray, blank: int) -> np.ndarray:
    # transition s-2 -> s allowed for non-blank s whose label differs from s-2
    skip = np.zeros(ext.size, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    return skip


def ctc_forward_backward(log_probs: np.ndarray, labels: np.ndarray, blank: int = 0):
    """Negative log-likelihood and its gradient with respect to ``log_probs``.

    ``log_probs`` is (T, V) in log space; the gradient equals minus the
    posterior state occupancy summed per symbol. Infeasible labellings give
    an infinite loss and a zero gradient.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    n_t = log_probs.shape[0]
    ext = extend_labels(np.asarray(labels, dtype=np.int64), blank)
    n_s = ext.size
    skip = _skip_mask(ext, blank)
    emit = log_probs[:, ext]  # (T, S)

    alpha = np.full((n_t, n_s), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if n_s > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, n_t):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    beta = np.full((n_t, n_s), NEG_INF)
    beta[-1, -1] = 0.0
    if n_s > 1:
        beta[-1, -2] = 0.0
    for t in range(n_t - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc

    log_p = alpha[-1, -1] if n_s == 1 else np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    grad = np.zeros_like(log_probs)
    if not np.isfinite(log_p):
        return np.inf, grad
    occ = np.exp(alpha + beta - log_p)
    for s in range(n_s):
        grad[:, ext[s]] -= occ[:, s]
    return float(-log_p), grad


def edit_table(ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    """Unit-cost Levenshtein DP table of shape (len(ref)+1, len(hyp)+1)."""
    n, m = len(ref), len(hyp)
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    table[:, 0] = np.arange(n + 1)
    table[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = table[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1])
            table[i, j] = min(sub, table[i - 1, j] + 1, table[i, j - 1] + 1)
    return table
