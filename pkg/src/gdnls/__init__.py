"""Spectral solvers and blowup analysis for the generalized derivative NLS equation."""

__version__ = "0.1.0"

from .spectral import ComplexField, Grid  # noqa: F401
