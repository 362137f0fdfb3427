"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``SDGFUSE_BACKEND=numpy``
to force the fallback (``SDGFUSE_BACKEND=cython`` makes a missing extension
an error instead of a silent fallback).
"""

import os

from . import _numpy

_requested = os.environ.get("SDGFUSE_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "numpy"):
    raise ImportError(f"SDGFUSE_BACKEND must be auto, cython or numpy, not {_requested!r}")

_compiled = None
if _requested != "numpy":
    try:
        from . import _ckernels as _compiled
    except ImportError:
        if _requested == "cython":
            raise

BACKENDS = {"numpy": _numpy}
if _compiled is not None:
    BACKENDS["cython"] = _compiled

BACKEND = "cython" if _compiled is not None else "numpy"
impl = BACKENDS[BACKEND]


def use(name):
    """Switch the active backend at runtime (benchmarks and equivalence tests)."""
    global impl, BACKEND
    impl = BACKENDS[name]
    BACKEND = name
