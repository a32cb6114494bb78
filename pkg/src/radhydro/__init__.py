"""Numerical laboratory for the diffusion-approximation radiation-hydrodynamics model."""

__version__ = "0.1.0"
