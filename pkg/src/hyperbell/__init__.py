"""Wigner-representation simulator for polarization-momentum hyperentangled photon pairs."""

__version__ = "0.1.0"
