"""Select the compiled kernels when available, the numpy fallback otherwise.

Set ``PQSL_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PQSL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"

rk4_integrate = _impl.rk4_integrate
qfi_sum = _impl.qfi_sum
