"""Selects the compiled kernels when available, else the numpy fallback.

Set ``KPMASS_PURE_PYTHON=1`` to force the fallback.
"""
import os

NAME = "python"

if os.environ.get("KPMASS_PURE_PYTHON", "") not in ("", "0"):
    from ._fallback import *  # noqa: F401,F403
else:
    try:
        from ._ckernels import *  # noqa: F401,F403
        NAME = "compiled"
    except ImportError:
        from ._fallback import *  # noqa: F401,F403
