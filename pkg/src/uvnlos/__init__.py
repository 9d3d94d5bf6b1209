"""Ultraviolet non-line-of-sight channel model with a cuboid obstacle."""

__version__ = "0.1.0"
