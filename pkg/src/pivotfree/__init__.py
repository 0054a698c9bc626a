"""Pivoting-free interior-point methods on static-pivot sparse LDL^T."""

from ._jit import JIT_ENABLED

__version__ = "0.1.0"
