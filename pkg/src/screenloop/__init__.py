"""Weak-supervision document screening with human-in-the-loop rounds."""

__version__ = "0.1.0"
