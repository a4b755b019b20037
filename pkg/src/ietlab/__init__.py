"""Interval exchanges, Rauzy-Veech renormalization and special flows under
roofs with logarithmic singularities."""

__version__ = "0.1.0"
