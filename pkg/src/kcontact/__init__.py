"""Dissipative field equations from k-contact Hamiltonian data."""

__version__ = "0.1.0"
