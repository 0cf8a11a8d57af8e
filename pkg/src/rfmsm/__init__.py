"""Masked signal modelling toolkit for few-shot radar signal recognition."""

__version__ = "0.1.0"
