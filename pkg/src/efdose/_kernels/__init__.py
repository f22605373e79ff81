"""Kernel backend selection.

The compiled Cython core is used when it built successfully; otherwise the
numpy implementation takes over. Set EFDOSE_PURE_PYTHON=1 to force the
fallback (useful for benchmarking and debugging).
"""
import os

from . import _numpy_impl

_impls = {"numpy": _numpy_impl}
if os.environ.get("EFDOSE_PURE_PYTHON", "") != "1":
    try:
        from . import _core  # compiled extension

        _impls["cython"] = _core
    except ImportError:
        pass

_active = _impls.get("cython", _numpy_impl)

BACKEND = _active.NAME

bspline_basis = _active.bspline_basis
bspline_basis_derivative = _active.bspline_basis_derivative
vc_forward = _active.vc_forward
vc_backward = _active.vc_backward


def available_backends():
    return tuple(sorted(_impls))


def get_backend(name: str):
    """Return the implementation module for `name` ('numpy' or 'cython')."""
    return _impls[name]
