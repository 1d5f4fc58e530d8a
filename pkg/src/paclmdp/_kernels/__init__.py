"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``paclmdp._kernels._core``, built from Cython) is
preferred when importable; otherwise the numpy reference implementation in
``_ref`` is used.  Set ``PACLMDP_KERNELS=py`` to force the fallback or
``PACLMDP_KERNELS=compiled`` to require the extension (ImportError if it is
missing).  Both backends implement identical contracts; see ``_ref`` for the
docstrings.
"""

import os

from . import _ref

_choice = os.environ.get("PACLMDP_KERNELS", "auto").lower()

if _choice in ("py", "python", "ref"):
    _impl = _ref
    BACKEND = "python"
elif _choice in ("compiled", "cy", "cython"):
    from . import _core as _impl

    BACKEND = "compiled"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "python"

rbf_eval = _impl.rbf_eval
mlp_eval = _impl.mlp_eval
project_simplex_cap = _impl.project_simplex_cap
