"""Hot loops with a compiled implementation and a pure-Python fallback.

The compiled extension is used when it imports; setting the environment
variable ``SHARPEDGES_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _elimination_py

BACKEND = "python"
eliminate = _elimination_py.eliminate

if os.environ.get("SHARPEDGES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _elimination as _compiled
    except ImportError:
        _compiled = None
    else:
        BACKEND = "cython"
        eliminate = _compiled.eliminate


def available_backends():
    out = {"python": _elimination_py.eliminate}
    try:
        from . import _elimination as compiled
    except ImportError:
        return out
    out["cython"] = compiled.eliminate
    return out
