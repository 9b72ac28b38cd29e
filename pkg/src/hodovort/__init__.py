"""Hodograph solutions of the homogeneous Euler equation ``u_t + (u . grad) u = 0``.

The package works entirely on the hodograph side: a solution is described by
an offset map ``f`` with ``x = u t + f(u)``, and every derivative of the
velocity follows from the matrix ``M = t I + df/du``.
"""

from .errors import *  # noqa: F401,F403
from .maps import InitialDataMap, builtin, from_expressions, load_map, parse_map_spec

__version__ = "0.1.0"
