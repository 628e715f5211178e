"""Texture classification of histopathology images from 2D VMD components."""
from .errors import ConfigError, DataError, NumericalError, VmdTexError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "NumericalError", "VmdTexError", "__version__"]
