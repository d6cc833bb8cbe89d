"""Novikov-Veselov pseudospectral and estimate-verification laboratory."""

__version__ = "0.1.0"
