"""Relative entropy, renormalized area and mean curvature flow in the half-space model."""

__version__ = "0.1.0"
