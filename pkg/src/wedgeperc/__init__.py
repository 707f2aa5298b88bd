"""Percolation on lattice wedges."""

__version__ = "0.1.0"
