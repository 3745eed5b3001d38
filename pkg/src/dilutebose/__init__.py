"""Dilute Bose gas spectral tools."""
__version__ = "0.1.0"
