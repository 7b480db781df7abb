"""Determinantal point process simulation and numerical checks."""

__version__ = "0.1.0"
