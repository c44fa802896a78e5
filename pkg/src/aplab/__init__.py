"""aplab: simulator and exact-verification lab for adaptive semi-random graph processes."""

__version__ = "0.1.0"
