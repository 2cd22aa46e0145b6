"""Select the sweep backend: compiled extension if importable, else NumPy.

Set ``QRINTERDICT_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

_compiled = None
if os.environ.get("QRINTERDICT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
sweep = _compiled.sweep if _compiled is not None else _kernels_py.sweep


def available_backends() -> dict[str, object]:
    out: dict[str, object] = {"python": _kernels_py.sweep}
    if _compiled is not None:
        out["cython"] = _compiled.sweep
    return out
