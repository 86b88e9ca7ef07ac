"""Accelerated gradient flows, their slow manifolds, and diagnostics."""
__version__ = "0.1.0"
