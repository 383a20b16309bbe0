"""Hot kernels: compiled Cython core with a NumPy fallback.

The backend is chosen at import.  Set ``ESDG_BACKEND=python`` to force the
NumPy implementation even when the extension is built.
"""
import os

from . import _pykernels as py

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

HAVE_COMPILED = compiled is not None
_requested = os.environ.get("ESDG_BACKEND", "").strip().lower()
if _requested not in ("", "auto", "python", "cython"):
    raise ImportError(f"ESDG_BACKEND must be 'python' or 'cython', got {_requested!r}")
if _requested == "cython" and not HAVE_COMPILED:
    raise ImportError("ESDG_BACKEND=cython but the compiled kernels are not built")

BACKEND = "cython" if HAVE_COMPILED and _requested != "python" else "python"

__all__ = ["BACKEND", "HAVE_COMPILED", "compiled", "py"]
