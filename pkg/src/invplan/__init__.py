"""Bayesian inverse planning over language-conditioned gameshow grid worlds."""

__version__ = "0.1.0"
