"""Topological (SSH / Rice-Mele) optical lattice clock simulation."""

__version__ = "0.1.0"
