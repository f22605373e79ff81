"""Deterministic first-order optimizers over a flat parameter vector."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

SGD = "sgd"
SGD_MOMENTUM = "sgd_momentum"
ADAM = "adam"


@dataclass
class OptimState:
    algorithm: str = ADAM
    lr: float = 1e-3
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.algorithm not in (SGD, SGD_MOMENTUM, ADAM):
            raise ConfigError(f"unknown optimizer {self.algorithm!r}")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


def step(state: OptimState, store, grad: np.ndarray) -> None:
    """One in-place update of store.vec."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != store.vec.shape:
        raise ConfigError("gradient length mismatch")
    if state.algorithm == SGD:
        store.vec -= state.lr * grad
        return
    if state.m is None:
        state.m = np.zeros_like(store.vec)
    if state.algorithm == SGD_MOMENTUM:
        state.m = state.momentum * state.m + grad
        store.vec -= state.lr * state.m
        return
    if state.v is None:
        state.v = np.zeros_like(store.vec)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    mhat = state.m / (1.0 - state.beta1**state.t)
    vhat = state.v / (1.0 - state.beta2**state.t)
    store.vec -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
