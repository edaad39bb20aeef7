"""Data-driven LQR controller synthesis via regularized semidefinite programs."""

from . import conic, datamodel, effects, harness, matlin, synthesis
from .errors import DdlqrError

__version__ = "0.1.0"

__all__ = [
    "DdlqrError",
    "conic",
    "datamodel",
    "effects",
    "harness",
    "matlin",
    "synthesis",
    "__version__",
]
