"""Adam with bias correction and the inverse-square-root warmup schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


def lr_at(step: int, noam_scale: float, d: int, warmup: int) -> float:
    """Noam rate: linear warmup to ``warmup`` then ``step**-0.5`` decay."""
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    return noam_scale * d ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: list[Tensor], grads: list[np.ndarray], state: AdamState, lr: float,
              betas: tuple[float, float] = (0.9, 0.98), eps: float = 1e-9) -> AdamState:
    """One in-place Adam update of ``params``; returns the advanced state."""
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    if len(state.m) != len(params):
        raise ValueError(f"optimizer state holds {len(state.m)} slots for {len(params)} params")
    b1, b2 = betas
    state.step += 1
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise ValueError(f"optimizer slot shape {m.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (lr / c1) * m / (np.sqrt(v / c2) + eps)
        p.data -= update.astype(p.dtype)
    return state
