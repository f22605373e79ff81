"""Flat parameter vector with a named-slice registry and seeded initialization.

All trainable parameters of a model live in one contiguous float64 vector;
layers see reshaped views. Initialization schemes:

  zeros         -- biases, perturbation coefficients
  uniform_fanin -- U(-limit, limit) with limit = gain * sqrt(3 / fan_in);
                   gain sqrt(2) for ReLU layers, 1 otherwise
  vc_tile       -- one uniform_fanin draw tiled across all basis blocks, so a
                   varying-coefficient layer starts dose-constant (B-spline
                   partition of unity); for a polynomial basis the draw goes
                   into the constant block and the rest start at zero
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .tape import Tensor


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    init: str = "zeros"
    fan_in: int = 0
    gain: float = 1.0
    poly: bool = False  # vc_tile: basis is polynomial (constant block first)


class ParamStore:
    def __init__(self, specs: list[ParamSpec], rng: np.random.Generator):
        self.specs = tuple(specs)
        names = [s.name for s in specs]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter names")
        self._slices: dict[str, tuple[int, int, tuple[int, ...]]] = {}
        total = 0
        for s in specs:
            size = int(np.prod(s.shape)) if s.shape else 1
            self._slices[s.name] = (total, total + size, s.shape)
            total += size
        self.vec = np.zeros(total)
        self.init_record = {
            "seed_state": None,
            "schemes": {s.name: s.init for s in specs},
        }
        self._initialize(rng)

    def _initialize(self, rng: np.random.Generator) -> None:
        for s in self.specs:
            view = self.view(s.name)
            if s.init == "zeros":
                continue
            if s.init == "uniform_fanin":
                limit = s.gain * np.sqrt(3.0 / max(s.fan_in, 1))
                view[...] = rng.uniform(-limit, limit, size=s.shape)
            elif s.init == "vc_tile":
                limit = s.gain * np.sqrt(3.0 / max(s.fan_in, 1))
                base = rng.uniform(-limit, limit, size=s.shape[1:])
                if s.poly:
                    view[0] = base
                else:
                    view[...] = base[None, ...]
            else:
                raise ConfigError(f"unknown init scheme {s.init!r}")

    @property
    def size(self) -> int:
        return self.vec.size

    def names(self) -> tuple[str, ...]:
        return tuple(self._slices)

    def slice_of(self, name: str) -> slice:
        start, stop, _ = self._slices[name]
        return slice(start, stop)

    def view(self, name: str) -> np.ndarray:
        start, stop, shape = self._slices[name]
        return self.vec[start:stop].reshape(shape)

    def set_param(self, name: str, value) -> None:
        self.view(name)[...] = value

    def leaves(self) -> dict[str, Tensor]:
        """Fresh leaf tensors over the current parameter values."""
        return {name: Tensor(self.view(name)) for name in self._slices}

    def grad_from_leaves(self, leaves: dict[str, Tensor]) -> np.ndarray:
        flat = np.zeros(self.size)
        for name, t in leaves.items():
            if t.grad is not None:
                start, stop, _ = self._slices[name]
                flat[start:stop] = np.ravel(t.grad)
        return flat

    def clone_vector(self) -> np.ndarray:
        return self.vec.copy()

    def load_vector(self, v: np.ndarray) -> None:
        v = np.asarray(v, dtype=float)
        if v.shape != self.vec.shape:
            raise ConfigError("parameter vector length mismatch")
        self.vec[...] = v
