"""Exponential Rosenbrock-type integrators with approximate Jacobians."""

__version__ = "0.1.0"
