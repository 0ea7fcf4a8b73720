"""Numerical microlocal analysis of Colombeau generalized functions."""

__version__ = "0.1.0"
