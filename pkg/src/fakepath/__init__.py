"""Fake-path injection for location privacy in SIMO channels."""

__version__ = "0.1.0"
