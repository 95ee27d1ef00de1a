"""Hot-loop kernels: the compiled extension when built, numpy otherwise.

Set ``SSLFUSE_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
if os.environ.get("SSLFUSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _native
    except ImportError:
        _native = None
    else:
        BACKEND = "native"
else:
    _native = None

_impl = _native if _native is not None else _fallback

ctc_forward_backward = _impl.ctc_forward_backward
edit_table = _impl.edit_table

__all__ = ["BACKEND", "ctc_forward_backward", "edit_table"]
