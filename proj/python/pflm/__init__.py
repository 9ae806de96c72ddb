"""Partially functional linear models: penalized estimation, finite-sample
risk bounds and minimax lower-bound certificates.

The heavy lifting lives in the compiled extension ``_pflm``; this package
just re-exports it. In an installed wheel the extension sits next to this
file; in a development tree it is found on PYTHONPATH (the build directory).
"""

try:
    from ._pflm import *  # noqa: F401,F403
    from . import _pflm as _impl
except ImportError:
    from _pflm import *  # noqa: F401,F403
    import _pflm as _impl

__all__ = [name for name in dir(_impl) if not name.startswith("_")]
__version__ = "0.1.0"
