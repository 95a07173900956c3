"""Entanglement classification with Bell-type features and small neural networks."""

__version__ = "0.1.0"
