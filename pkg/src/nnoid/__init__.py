"""Numerical construction of symmetric CMC n-noids by the loop-group method."""

__version__ = "0.1.0"
