"""Chemotherapy outcome extraction and survival modelling toolkit."""

__version__ = "0.1.0"
