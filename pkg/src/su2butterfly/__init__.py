"""Floquet butterfly spectra of driven SU(2) systems."""

__version__ = "0.1.0"
