"""Pseudospectral lab for 2-D NLS / Hartree scattering experiments."""

__version__ = "0.1.0"
