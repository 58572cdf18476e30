"""Process-model GPP with a learned, site-validated bias correction."""

__version__ = "0.1.0"
