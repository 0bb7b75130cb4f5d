"""Sparse demand-side frequency control that tolerates multiplicative load noise."""

__version__ = "0.1.0"
