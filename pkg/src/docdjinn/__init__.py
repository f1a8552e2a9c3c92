"""Synthetic document generation from unlabeled seed corpora."""

__version__ = "0.1.0"
