"""Distributed linear-quadratic estimation and control over directed graphs.

Thin re-export of the compiled core. The heavy lifting lives in C++; this
package exists so notebooks and scripts can drive synthesis, verification,
and simulation without shelling out to the CLI.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "1.0.0"
