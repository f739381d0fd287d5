"""Backend selection for the raster kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is used. Setting ``FOOTKIT_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None
else:
    BACKENDS["compiled"] = _kernels_ext

if _kernels_ext is not None and os.environ.get("FOOTKIT_PURE_PYTHON", "") not in ("1", "true"):
    BACKEND = "compiled"
else:
    BACKEND = "python"


def get_backend(name):
    """Return the kernel module for ``name`` ("python" or "compiled")."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def use_backend(name):
    """Route the module-level kernels to backend ``name``; returns the previous name."""
    global BACKEND, shift_overlap_counts, fill_polygon, trace_boundary
    impl = get_backend(name)
    previous = BACKEND
    BACKEND = name
    shift_overlap_counts = impl.shift_overlap_counts
    fill_polygon = impl.fill_polygon
    trace_boundary = impl.trace_boundary
    return previous


use_backend(BACKEND)
