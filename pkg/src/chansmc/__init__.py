"""Statistical model checking of timed probabilistic channel systems."""

__version__ = "0.1.0"
