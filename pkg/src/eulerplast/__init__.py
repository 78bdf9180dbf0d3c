"""Eulerian finite-strain thermoplasticity on a structured 2-D grid."""

__version__ = "0.1.0"
