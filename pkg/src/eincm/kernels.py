"""Backend selection for the splatting kernels.

The compiled extension is used when it imports; otherwise the numpy
implementation is used. Set ``EINCM_PURE_PYTHON=1`` to force the fallback.
"""
import logging
import os

from . import _splat_py

log = logging.getLogger(__name__)

BACKEND = "python"
_impl = _splat_py

if os.environ.get("EINCM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _splat as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        log.debug("compiled splat kernel unavailable, using numpy fallback")
        _impl = _splat_py

splat = _impl.splat
splat_adjoint = _impl.splat_adjoint
n_slots = _splat_py.n_slots

__all__ = ["BACKEND", "splat", "splat_adjoint", "n_slots"]
