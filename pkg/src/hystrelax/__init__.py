"""Numerical laboratory for a controlled reaction-diffusion population model
with generalized-stop hysteresis and nonconvex control constraints."""

__version__ = "0.1.0"
