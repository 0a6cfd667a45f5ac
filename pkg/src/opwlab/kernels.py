"""Backend selection for the dense quadrature kernels.

The compiled extension is used when it imports; set ``OPWLAB_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
dense_apply = _kernels_py.dense_apply
dense_apply_adjoint = _kernels_py.dense_apply_adjoint

if not os.environ.get("OPWLAB_PURE_PYTHON"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        dense_apply = _kernels.dense_apply
        dense_apply_adjoint = _kernels.dense_apply_adjoint
        BACKEND = "compiled"

__all__ = ["BACKEND", "dense_apply", "dense_apply_adjoint"]
