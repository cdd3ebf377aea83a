"""Numerical laboratory for discretized measures, curved tubes and incidences."""

__version__ = "0.1.0"
