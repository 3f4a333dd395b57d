"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy/Python
fallback is used.  Setting ``LOGITMETA_PURE=1`` forces the fallback.
"""

import os

from . import _kernels_py

_pure = os.environ.get("LOGITMETA_PURE", "") not in ("", "0")

if _pure:
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

subset_flows = _impl.subset_flows
simulate_path = _impl.simulate_path
step_batch = _impl.step_batch
