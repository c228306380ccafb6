"""Kernel selection.

The compiled extension is used when it imports; otherwise the NumPy kernels.
Set ``ENKBF_DP_BACKEND=python`` to force the fallback or ``=compiled`` to make
a missing extension an error.
"""

import os

from . import _pykernels

_requested = os.environ.get("ENKBF_DP_BACKEND", "auto").lower()

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _requested == "python":
    kernels = _pykernels
elif _compiled is not None:
    kernels = _compiled
elif _requested == "compiled":
    raise ImportError("ENKBF_DP_BACKEND=compiled but enkbf_dp._kernels is not built")
else:
    kernels = _pykernels

BACKEND = kernels.NAME


def available() -> dict:
    out = {"python": _pykernels}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
