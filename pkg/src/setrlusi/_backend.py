"""Selects the compiled kernels when available, NumPy otherwise.

Set ``SETRLUSI_BACKEND`` to ``python`` or ``compiled`` to force one side;
the default ``auto`` prefers the compiled extension.
"""

import os

from . import _kernels_py

_requested = os.environ.get("SETRLUSI_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "compiled"):
    raise ImportError(f"unknown SETRLUSI_BACKEND value: {_requested!r}")

_impl = _kernels_py
_name = "python"

if _requested in ("auto", "compiled"):
    try:
        from . import _vkernels

        _impl = _vkernels
        _name = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "SETRLUSI_BACKEND=compiled but the _vkernels extension is not built"
            )


def active_backend() -> str:
    """Name of the kernel backend in use: 'compiled' or 'python'."""
    return _name


def v_matrix(samples):
    return _impl.v_matrix(samples)


def rbf_kernel(rows, centers, sigma):
    return _impl.rbf_kernel(rows, centers, sigma)
