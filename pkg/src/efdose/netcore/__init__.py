"""Minimal differentiable-computation engine: tape autodiff, layers,
parameter store, optimizers and gradient checking."""
from . import tape
from .gradcheck import GradCheckReport, grad_check, loss_and_grad
from .layers import (DENSE, VC_DENSE, GraphSpec, LayerSpec, dose_basis_values,
                     forward_np, forward_tape, param_specs)
from .optim import ADAM, SGD, SGD_MOMENTUM, OptimState, step
from .params import ParamSpec, ParamStore
from .tape import Tensor

__all__ = [
    "tape", "Tensor", "ParamSpec", "ParamStore", "GraphSpec", "LayerSpec",
    "DENSE", "VC_DENSE", "param_specs", "forward_np", "forward_tape",
    "dose_basis_values", "OptimState", "step", "SGD", "SGD_MOMENTUM", "ADAM",
    "grad_check", "loss_and_grad", "GradCheckReport",
]
