"""Surrogate-assisted tuning of a binary RIS in a dynamic rich-scattering enclosure."""

__version__ = "0.1.0"
