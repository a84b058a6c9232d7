"""Kernel backend dispatch.

The compiled extension is used when it imported cleanly; otherwise the
pure-Python reference takes over.  ``TOPL_PURE=1`` in the environment forces
the reference backend (useful for cross-checking and for the benchmark).
"""

import os

if os.environ.get("TOPL_PURE") == "1":
    from . import _pykernels as kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        from . import _pykernels as kernels

BACKEND: str = kernels.BACKEND

__all__ = ["kernels", "BACKEND"]
