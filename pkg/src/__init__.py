"""Fixed-point laboratory for small dense networks."""

__version__ = "0.1.0"
