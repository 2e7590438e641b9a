"""Kernel dispatch: compiled C loops when available, numpy otherwise.

Set the environment variable SQUEEZEKIT_PURE=1 before import to force the
pure-numpy implementations (useful for benchmarking and debugging).
``BACKEND`` records which implementation is active.
"""
import os

from . import _kernels_py

if os.environ.get("SQUEEZEKIT_PURE") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

apply_single_qubit = _impl.apply_single_qubit
phase_mul = _impl.phase_mul
accumulate_jx = _impl.accumulate_jx
accumulate_jy = _impl.accumulate_jy
