"""Quasistatic crack growth in linear elasticity by vanishing viscosity."""

__version__ = "0.1.0"
