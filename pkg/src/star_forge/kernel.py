"""Selects the compiled Moyal kernel when available, else the pure-Python one."""

import os

BACKEND = "python"

if os.environ.get("STAR_FORGE_PURE", "") not in ("", "0"):
    from ._moyal_py import moyal_terms, wedge_sign
else:
    try:
        from ._moyal_ext import moyal_terms, wedge_sign

        BACKEND = "cython"
    except ImportError:  # no compiled extension in this install
        from ._moyal_py import moyal_terms, wedge_sign

__all__ = ["BACKEND", "moyal_terms", "wedge_sign"]
