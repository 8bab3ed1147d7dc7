"""Batched interpolation kernels, compiled when available.

The Cython extension ``_kernels`` is used if it was built; otherwise (or when
``SEVENLEAGUE_PURE_PYTHON=1`` is set) the numpy fallback is used. Both expose
``pchip_slopes``, ``hermite_eval``, ``pchip_eval``, ``bary_eval`` and
``cheb_eval`` with identical semantics.
"""
import os

from . import _kernels_py

try:
    if os.environ.get("SEVENLEAGUE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure python requested")
    from . import _kernels as _impl
    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def get_backend(name: str | None = None):
    """Return a kernel module by name (``"cython"`` or ``"python"``); default is the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


pchip_slopes = _impl.pchip_slopes
hermite_eval = _impl.hermite_eval
pchip_eval = _impl.pchip_eval
bary_eval = _impl.bary_eval
cheb_eval = _impl.cheb_eval
