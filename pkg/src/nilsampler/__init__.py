"""Sampling and equidistribution checks for Hardy-field orbits on nilmanifolds."""

__version__ = "0.1.0"
