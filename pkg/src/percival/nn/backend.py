"""Kernel backend selection.

The compiled extension (percival.nn._kernels, Cython) is preferred when it
imported cleanly; otherwise the numpy fallback (percival.nn._kernels_py) is
used. PERCIVAL_BACKEND=python or =cython forces the choice; forcing cython
without a built extension is a hard error rather than a silent fallback.
"""

import os

_forced = os.environ.get("PERCIVAL_BACKEND", "").strip().lower()

if _forced == "python":
    from percival.nn import _kernels_py as kernels
elif _forced == "cython":
    try:
        from percival.nn import _kernels as kernels
    except ImportError as exc:
        raise RuntimeError(
            "PERCIVAL_BACKEND=cython but the compiled extension is not built; "
            "run pip install -e . --no-build-isolation"
        ) from exc
elif _forced:
    raise RuntimeError(f"unknown PERCIVAL_BACKEND {_forced!r} (use python or cython)")
else:
    try:
        from percival.nn import _kernels as kernels
    except ImportError:
        from percival.nn import _kernels_py as kernels


def backend_name():
    return kernels.BACKEND_NAME
