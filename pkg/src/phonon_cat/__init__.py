"""Driven-dissipative two-phonon Jaynes-Cummings simulations for a spin-mechanical cat source."""

__version__ = "0.1.0"
