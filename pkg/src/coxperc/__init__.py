"""Continuum percolation for Cox point processes."""
__version__ = "0.1.0"
