"""Quantum trajectories of open systems driven by a single-photon wave packet."""

__version__ = "0.1.0"
