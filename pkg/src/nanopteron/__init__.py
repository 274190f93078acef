"""Nanopteron traveling waves of the diatomic FPUT lattice."""

__version__ = "0.1.0"
