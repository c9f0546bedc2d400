"""Evolutionary correlation spectra, spectral regime detection, and sector
portfolio simulation for asset-price panels."""

__version__ = "0.1.0"
