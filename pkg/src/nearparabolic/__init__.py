"""Near-parabolic renormalization toolkit for quadratic polynomials."""

from .errors import ConfigError, NearParabolicError

__version__ = "0.1.0"

__all__ = ["ConfigError", "NearParabolicError", "__version__"]
