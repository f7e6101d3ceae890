"""Explicit meromorphic function whose valence outruns its average valence, with the tools to check it."""

__version__ = "0.1.0"
