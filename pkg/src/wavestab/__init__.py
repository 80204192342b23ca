"""Backstepping stabilization of a 1-D wave equation with a bounded boundary disturbance."""

__version__ = "0.1.0"
