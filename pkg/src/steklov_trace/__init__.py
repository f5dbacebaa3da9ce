"""Steklov and boundary-Laplace spectra on triangulated 2-D domains, with
replayable trace / inverse-trace inequality checks."""

__version__ = "0.1.0"
