"""Non-reciprocal cavity polariton simulator."""

__version__ = "0.1.0"
