"""Hot-kernel dispatch: compiled extension when available, pure Python
otherwise. Set MAPBENCH_PURE_PYTHON=1 to force the fallback.

Both backends are bit-identical; the choice only affects speed.
"""

import os

from . import _pyfallback

if os.environ.get("MAPBENCH_PURE_PYTHON"):
    _impl = _pyfallback
    BACKEND = "python"
else:
    try:
        from . import _native as _impl

        BACKEND = "native"
    except ImportError:
        _impl = _pyfallback
        BACKEND = "python"

thin = _impl.thin
line_blocked = _impl.line_blocked
visible_mask = _impl.visible_mask
