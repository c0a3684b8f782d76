"""Verifier selection for C programs via graph attention over program graphs."""

__version__ = "0.1.0"
