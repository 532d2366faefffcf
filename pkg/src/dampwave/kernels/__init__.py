"""Hot-loop kernels with a compiled core and a numpy fallback.

The compiled extension ``_ext`` (Cython) is used when importable.  Set the
environment variable ``DAMPWAVE_BACKEND`` to ``pure`` to force the numpy
fallback, or to ``ext`` to make a missing extension an import error.

Exports
-------
leapfrog_step
    One damped leapfrog sweep over a box, returning the step moments.
elastic_apply
    Discrete elastic operator over a box.
potential_direct
    Direct summation of the 2-D log kernel and its gradient.
BACKEND
    ``"ext"`` or ``"pure"``.
"""
import os

from . import _pure

_choice = os.environ.get("DAMPWAVE_BACKEND", "").strip().lower()

if _choice == "pure":
    _impl = _pure
else:
    try:
        from . import _ext as _impl
    except ImportError:
        if _choice == "ext":
            raise
        _impl = _pure

BACKEND = "ext" if _impl is not _pure else "pure"

leapfrog_step = _impl.leapfrog_step
elastic_apply = _impl.elastic_apply
potential_direct = _impl.potential_direct


def backends():
    """Return every importable backend as a ``{name: module}`` dict."""
    found = {"pure": _pure}
    try:
        from . import _ext
    except ImportError:
        pass
    else:
        found["ext"] = _ext
    return found
