"""Layer descriptors and the forward pass (numpy and taped variants).

A GraphSpec is an ordered stack of Dense / VaryingCoeffDense layers. The
varying-coefficient weight at dose a is W(a) = sum_l basis_l(a) * alpha_l,
exactly linear in the basis values; its bias is dose-varying the same way.
Both forward variants share the kernel backend, so they agree bitwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .. import _kernels
from ..basis import Basis, PolyBasis, eval_basis_batch
from ..errors import ConfigError
from . import tape
from .params import ParamSpec
from .tape import Tensor

DENSE = "dense"
VC_DENSE = "vc_dense"

ACTIVATIONS = ("relu", "sigmoid", "exp", "identity", "softplus")

_ACT_NP = {
    "relu": lambda x: np.maximum(x, 0.0),
    "sigmoid": expit,
    "exp": np.exp,
    "identity": lambda x: x,
    "softplus": lambda x: np.logaddexp(0.0, x),
}

_ACT_TAPE = {
    "relu": tape.relu,
    "sigmoid": tape.sigmoid,
    "exp": tape.exp,
    "identity": lambda x: x,
    "softplus": tape.softplus,
}

_GAIN = {"relu": np.sqrt(2.0)}


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    activation: str = "identity"

    def __post_init__(self):
        if self.kind not in (DENSE, VC_DENSE):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError("layer dims must be positive")


@dataclass(frozen=True)
class GraphSpec:
    """Named layer stack; `dose_basis` is required iff any layer is VC."""

    name: str
    layers: tuple[LayerSpec, ...]
    dose_basis: Basis | None = None

    def __post_init__(self):
        has_vc = any(l.kind == VC_DENSE for l in self.layers)
        if has_vc and self.dose_basis is None:
            raise ConfigError("varying-coefficient layers need a dose basis")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ConfigError(
                    f"graph {self.name}: dim mismatch {prev.out_dim} -> {nxt.in_dim}"
                )

    @property
    def has_vc(self) -> bool:
        return any(l.kind == VC_DENSE for l in self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


def param_specs(graph: GraphSpec) -> list[ParamSpec]:
    """Parameter slices for a graph, in layer order."""
    specs = []
    L = graph.dose_basis.size if graph.dose_basis is not None else 0
    poly = isinstance(graph.dose_basis, PolyBasis)
    for i, layer in enumerate(graph.layers):
        prefix = f"{graph.name}.{i}"
        gain = _GAIN.get(layer.activation, 1.0)
        if layer.kind == DENSE:
            specs.append(
                ParamSpec(f"{prefix}.W", (layer.in_dim, layer.out_dim),
                          "uniform_fanin", fan_in=layer.in_dim, gain=gain)
            )
            specs.append(ParamSpec(f"{prefix}.b", (layer.out_dim,)))
        else:
            specs.append(
                ParamSpec(f"{prefix}.alpha", (L, layer.in_dim, layer.out_dim),
                          "vc_tile", fan_in=layer.in_dim, gain=gain, poly=poly)
            )
            specs.append(ParamSpec(f"{prefix}.beta", (L, layer.out_dim)))
    return specs


def forward_np(graph: GraphSpec, store, x: np.ndarray, bvals: np.ndarray | None = None
               ) -> np.ndarray:
    """Numpy forward pass; `bvals` are precomputed dose-basis values (n, L)."""
    h = np.asarray(x, dtype=float)
    if h.ndim != 2 or h.shape[1] != graph.in_dim:
        raise ConfigError(f"graph {graph.name}: input dim {h.shape} != {graph.in_dim}")
    if graph.has_vc and bvals is None:
        raise ConfigError(f"graph {graph.name}: dose basis values required")
    for i, layer in enumerate(graph.layers):
        prefix = f"{graph.name}.{i}"
        if layer.kind == DENSE:
            h = h @ store.view(f"{prefix}.W") + store.view(f"{prefix}.b")
        else:
            h = _kernels.vc_forward(bvals, store.view(f"{prefix}.alpha"), h)
            h = h + bvals @ store.view(f"{prefix}.beta")
        h = _ACT_NP[layer.activation](h)
    return h


def forward_tape(graph: GraphSpec, leaves: dict[str, Tensor], x,
                 bvals: np.ndarray | None = None) -> Tensor:
    """Taped forward pass over leaf tensors (same math as forward_np)."""
    h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=float))
    if graph.has_vc and bvals is None:
        raise ConfigError(f"graph {graph.name}: dose basis values required")
    for i, layer in enumerate(graph.layers):
        prefix = f"{graph.name}.{i}"
        if layer.kind == DENSE:
            h = tape.matmul(h, leaves[f"{prefix}.W"]) + leaves[f"{prefix}.b"]
        else:
            h = tape.vc_dense(bvals, leaves[f"{prefix}.alpha"], h)
            h = h + tape.matmul(bvals, leaves[f"{prefix}.beta"])
        h = _ACT_TAPE[layer.activation](h)
    return h


def dose_basis_values(graph: GraphSpec, a) -> np.ndarray | None:
    """Basis values for a dose vector, or None for a dose-free graph."""
    if graph.dose_basis is None:
        return None
    return eval_basis_batch(graph.dose_basis, a)
