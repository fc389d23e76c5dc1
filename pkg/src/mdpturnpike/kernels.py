"""Backend selection for the hot loops.

The compiled ``_ckernels`` module is used when importable; otherwise, or
when the environment variable ``MDPTURNPIKE_PURE_PYTHON`` is set to ``1``,
the numpy versions from ``_pykernels`` are used. ``BACKEND`` names the
active choice.
"""
import os

from . import _pykernels

if os.environ.get("MDPTURNPIKE_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

walk_forward = _impl.walk_forward
gs_sweep = _impl.gs_sweep
min_row_overlap = _impl.min_row_overlap


def available_backends():
    """Return ``{name: module}`` for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out
