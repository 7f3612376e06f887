"""Differential spatial modulation for pinching-antenna systems."""

__version__ = "0.1.0"
