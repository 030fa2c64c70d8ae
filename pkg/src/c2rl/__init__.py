"""Bloom-filter compressed certificate revocation lists."""

__version__ = "0.1.0"
