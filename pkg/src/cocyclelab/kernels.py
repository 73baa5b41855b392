"""Kernel backend selection.

Imports the compiled extension when present, otherwise falls back to the
pure-Python implementation.  ``COCYCLELAB_KERNELS=python`` forces the
fallback (useful for the parity tests and the benchmark).
"""

import os

if os.environ.get("COCYCLELAB_KERNELS", "").lower() == "python":
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _kernels_py as _impl

mgs_qr = _impl.mgs_qr
qr_chain = _impl.qr_chain
product_chain = _impl.product_chain
back_solve_chain = _impl.back_solve_chain
vector_chain = _impl.vector_chain
frame_minmax_chain = _impl.frame_minmax_chain


def backend_name():
    """'compiled' when the Cython extension is active, else 'python'."""
    return "compiled" if _impl.COMPILED else "python"
