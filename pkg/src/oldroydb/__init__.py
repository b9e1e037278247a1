"""Pseudo-spectral laboratory for the Oldroyd-B model with stress diffusion."""

__version__ = "0.1.0"
