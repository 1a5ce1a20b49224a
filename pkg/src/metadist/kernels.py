"""Kernel backend selection.

The compiled extension is used when importable; set
``METADIST_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels

compiled_backend = None
if os.environ.get("METADIST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

pairwise = backend.pairwise
rowwise = backend.rowwise
