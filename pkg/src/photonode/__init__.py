"""Simulation and tomography toolkit for a photonic two-qubit network node."""

__version__ = "0.1.0"
