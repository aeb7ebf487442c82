"""Henon-like maps at the first bifurcation parameter.

Saddle and manifold geometry, the bifurcation search, recurrence and binding
analysis, the inducing partition, pressure and spectra, and orbit synthesis.
"""
from .core import MapParams, SaddleData, find_saddles
from .errors import HenonError

__version__ = "0.1.0"

__all__ = ["MapParams", "SaddleData", "find_saddles", "HenonError", "__version__"]
