"""Select the kernel backend at import time.

Prefers the compiled `_fastops` extension; falls back to the numpy
implementations when the extension is missing. Override with
``FNDIFF_BACKEND=compiled|python`` (``compiled`` raises if unavailable,
which is what the test suite uses to pin a backend).
"""

from __future__ import annotations

import os

from . import _kernels_np

_choice = os.environ.get("FNDIFF_BACKEND", "auto").lower()

if _choice not in ("auto", "compiled", "python"):
    raise ValueError(f"FNDIFF_BACKEND must be auto|compiled|python, got {_choice!r}")

if _choice == "python":
    kernels = _kernels_np
    BACKEND = "python"
else:
    try:
        from . import _fastops as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise ImportError(
                "FNDIFF_BACKEND=compiled but the fndiff._fastops extension is not built; "
                "run `pip install -e . --no-build-isolation` or drop the override"
            ) from None
        kernels = _kernels_np
        BACKEND = "python"


def backend_name() -> str:
    """Name of the active kernel backend ('compiled' or 'python')."""
    return BACKEND
