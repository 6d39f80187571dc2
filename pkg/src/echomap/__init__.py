"""Acoustic impact sounding: signal analysis, pose graphs, subsurface imaging."""

__version__ = "0.1.0"
