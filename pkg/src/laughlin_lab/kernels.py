"""Kernel backend selection: compiled extension if available, numpy fallback otherwise.

Set LAUGHLIN_LAB_BACKEND=python to force the fallback.
"""

import os

from . import _ref

try:
    from . import _fast
except ImportError:
    _fast = None

if _fast is not None and os.environ.get("LAUGHLIN_LAB_BACKEND", "") != "python":
    BACKEND = "cython"
    metropolis_sweeps = _fast.metropolis_sweeps
    psor_sweeps = _fast.psor_sweeps
else:
    BACKEND = "python"
    metropolis_sweeps = _ref.metropolis_sweeps
    psor_sweeps = _ref.psor_sweeps


def available_backends():
    out = {"python": _ref}
    if _fast is not None:
        out["cython"] = _fast
    return out
