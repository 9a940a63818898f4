"""Measurement-based admission control schemes over a token-bucket link."""

__version__ = "0.1.0"
