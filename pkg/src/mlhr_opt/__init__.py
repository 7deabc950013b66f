"""IPMSM commutation-angle analysis and MLHR surrogate-assisted magnet sizing."""

from ._jit import ENABLED as NUMBA_ENABLED

__version__ = "0.1.0"

__all__ = ["NUMBA_ENABLED", "__version__"]
