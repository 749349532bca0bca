"""Neighbourhood Transformer graph-learning engine on numpy."""

__version__ = "0.1.0"
