"""Corpus-driven humor classification and joke generation toolkit."""

__version__ = "0.1.0"
