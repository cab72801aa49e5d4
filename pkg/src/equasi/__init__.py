"""Numerical certification toolkit for e-quasiconvex analysis."""

__version__ = "0.1.0"
