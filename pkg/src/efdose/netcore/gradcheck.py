"""Analytic-vs-finite-difference gradient verification.

The contract of the whole engine is this check: the taped gradient of any
loss closure must match central differences in double precision. Relative
error uses a unit floor, |g - fd| / max(1, |g|, |fd|), so coordinates with
near-zero gradients are compared absolutely.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParamStore
from .tape import Tensor


def loss_and_grad(store: ParamStore, closure) -> tuple[float, np.ndarray]:
    """Evaluate `closure(leaves) -> scalar Tensor` and its full gradient."""
    leaves = store.leaves()
    loss = closure(leaves)
    if not isinstance(loss, Tensor) or loss.ndim != 0:
        raise TypeError("closure must return a scalar Tensor")
    loss.backward()
    return loss.item(), store.grad_from_leaves(leaves)


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    worst_coordinate: int
    worst_name: str
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tol


def grad_check(store: ParamStore, closure, step: float = 1e-5, tol: float = 1e-4,
               coords=None) -> GradCheckReport:
    """Compare the taped gradient against central differences.

    `coords` restricts the check to a subset of flat indices (all by default).
    """
    _, analytic = loss_and_grad(store, closure)
    if coords is None:
        coords = range(store.size)
    original = store.clone_vector()
    worst = (0.0, -1)
    try:
        for j in coords:
            store.vec[j] = original[j] + step
            up, _ = loss_and_grad(store, closure)
            store.vec[j] = original[j] - step
            dn, _ = loss_and_grad(store, closure)
            store.vec[j] = original[j]
            fd = (up - dn) / (2.0 * step)
            err = abs(analytic[j] - fd) / max(1.0, abs(analytic[j]), abs(fd))
            if err > worst[0]:
                worst = (err, j)
    finally:
        store.load_vector(original)
    name = _name_of(store, worst[1]) if worst[1] >= 0 else ""
    return GradCheckReport(worst[0], worst[1], name, tol)


def _name_of(store: ParamStore, flat_index: int) -> str:
    for name in store.names():
        s = store.slice_of(name)
        if s.start <= flat_index < s.stop:
            return name
    return ""
