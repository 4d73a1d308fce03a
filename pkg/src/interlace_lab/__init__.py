"""interlace_lab: Hua-Pickrell diffusions, interlacing links and boundary dynamics."""

from . import core, rmt, links, sde, multilevel, matrix, pde, verify  # noqa: F401
from .kernels import BACKEND  # noqa: F401

__version__ = "0.1.0"
