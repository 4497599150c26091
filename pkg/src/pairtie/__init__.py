"""Paired-comparison models with strength-dependent draw and first-move effects."""

__version__ = "0.1.0"
