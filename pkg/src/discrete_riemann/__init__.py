"""Discrete Riemann surfaces on quad-graphs."""

__version__ = "0.1.0"
