"""Numerical laboratory for the thin obstacle (Signorini) problem near regular free-boundary points."""

__version__ = "0.1.0"
