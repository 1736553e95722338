"""Steady states and gradient flows for the deep quench obstacle problem and surface diffusion on a disk."""

__version__ = "0.1.0"
