"""Layered experiment-to-message-design pipeline."""

__version__ = "0.1.0"
