"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``GLAM_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("GLAM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "compiled"

invert_logit = _impl.invert_logit
loglik_terms = _impl.loglik_terms
sir_batch = _impl.sir_batch

TMAX = _kernels_py.TMAX
STATUS_INSIDE = _kernels_py.STATUS_INSIDE
STATUS_BELOW = _kernels_py.STATUS_BELOW
STATUS_ABOVE = _kernels_py.STATUS_ABOVE
STATUS_FAILED = _kernels_py.STATUS_FAILED
