"""Simulation lab for trap behaviour of Brownian motions on irregular domains."""

__version__ = "0.1.0"
