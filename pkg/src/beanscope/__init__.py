"""Colour-distribution grading of green coffee beans."""

__version__ = "0.1.0"
