"""Smooth compactly supported Alpert wavelet frames on truncated dyadic grids."""

__version__ = "0.1.0"
