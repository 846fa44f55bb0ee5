"""Backend selection for the stepping core.

The integrator's inner loop (rate vector + embedded trial step) exists
twice: a compiled Cython extension (``selmut._core``) and a pure-Python
twin (``selmut._pycore``).  Both implement the same arithmetic in the
same order, so results are bit-identical; the compiled one is just
faster.  The extension is optional — source installs without a C
compiler fall back to the Python core with a warning.

Set the environment variable ``SELMUT_BACKEND`` to ``python`` or
``compiled`` to force a choice (``compiled`` raises if the extension
is not importable).
"""

from __future__ import annotations

import os
import warnings

from . import _pycore

try:
    from . import _core  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False

_FORCED = os.environ.get("SELMUT_BACKEND", "").strip().lower()

if _FORCED == "compiled":
    if not HAVE_COMPILED:
        raise ImportError(
            "SELMUT_BACKEND=compiled but the selmut._core extension is not "
            "built; reinstall with Cython and a C compiler available"
        )
    _default = _core
elif _FORCED == "python":
    _default = _pycore
elif _FORCED:
    raise ImportError(
        f"SELMUT_BACKEND={_FORCED!r} not understood (use 'python' or 'compiled')"
    )
elif HAVE_COMPILED:
    _default = _core
else:
    warnings.warn(
        "selmut._core extension not built; using the pure-Python stepping "
        "core (identical results, slower)",
        RuntimeWarning,
        stacklevel=2,
    )
    _default = _pycore

BACKEND_NAME = "compiled" if _default is _core else "python"


def get_backend(name: str | None = None):
    """Return a stepping-core module.

    Args:
        name: ``"python"``, ``"compiled"``, or None for the default
            chosen at import time.
    """
    if name is None:
        return _default
    if name == "python":
        return _pycore
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ImportError("selmut._core extension is not built")
        return _core
    raise ValueError(f"unknown backend {name!r}")
