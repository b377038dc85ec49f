"""Symbolic/numeric invariants of plane PDE pairs and their conformal
solution-space geometry."""

__version__ = "0.1.0"
