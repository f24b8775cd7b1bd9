"""Mesh-free PINN solver for time-dependent PDEs on closed surfaces."""

__version__ = "0.1.0"
