"""Tracing attacks against (approximate) differentially private top-k selection."""

__version__ = "0.3.0"
