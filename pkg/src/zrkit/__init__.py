"""Zero-resource speech features: MFCC, VTLN, correspondence autoencoders
and the same-different word discrimination evaluation."""

__version__ = "0.1.0"

from .errors import FormatError, ZrkitError  # noqa: F401
