"""Composite-particle tunneling through symmetric and antisymmetric barrier pairs."""

__version__ = "0.1.0"
