"""Backend selection for the inner loops.

The compiled extension is used when it was built; otherwise, or when
``ORTHOREC_PURE_PYTHON`` is set to a non-empty value, the numpy fallback
is loaded. ``BACKEND`` names the active one.
"""
import os

if os.environ.get("ORTHOREC_PURE_PYTHON"):
    from ._pykernels import *  # noqa: F401,F403
    BACKEND = "python"
else:
    try:
        from ._ckernels import *  # noqa: F401,F403
        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._pykernels import *  # noqa: F401,F403
        BACKEND = "python"

__all__ = [
    "rot_rows",
    "rot_cols",
    "apply_rows_seq",
    "apply_cols_seq",
    "forward_recurrence",
    "backward_correct",
    "forward_correct",
    "BACKEND",
]
