from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              l2_coeff: float = 0.0, decay_mask: Sequence[bool] | None = None) -> None:
    """One bias-corrected Adam update, in place.

    L2 regularization enters as ``grad + l2_coeff * param`` for tensors whose
    ``decay_mask`` entry is true (weights); biases are exempt.
    """
    if len(params) != len(grads):
        raise ShapeMismatch(f"{len(params)} parameters but {len(grads)} gradients")
    if decay_mask is None:
        decay_mask = [True] * len(params)
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, g, m, v, decay in zip(params, grads, state.m, state.v, decay_mask):
        if g.shape != p.shape or m.shape != p.shape:
            raise ShapeMismatch(f"gradient {g.shape} does not match parameter {p.shape}")
        if decay and l2_coeff:
            g = g + l2_coeff * p
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * (g * g)
        p -= (state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)).astype(p.dtype, copy=False)
