"""AdamW with decoupled weight decay and a step-halving learning-rate schedule."""

from __future__ import annotations

import numpy as np

from tfs3d.schemas.quest import QuestConfig
from tfs3d.services.quest import QuestParameters


def learning_rate(iteration: int, cfg: QuestConfig) -> float:
    """Base rate halved every `lr_halve_every` iterations (0-based)."""
    return cfg.lr * 0.5 ** (iteration // cfg.lr_halve_every)


def adamw_step(
    params: QuestParameters,
    grads: dict[str, np.ndarray],
    lr: float,
    cfg: QuestConfig,
) -> None:
    """One in-place AdamW update of every tensor in `params`.

    p <- p * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
    """
    state = params.adam
    state.step += 1
    t = state.step
    bias1 = 1.0 - cfg.beta1 ** t
    bias2 = 1.0 - cfg.beta2 ** t
    for name, param in params.tensors.items():
        grad = grads[name]
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * grad
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * grad * grad
        if lr == 0.0:
            continue
        step = lr * (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)
        param *= 1.0 - lr * cfg.weight_decay
        param -= step
