"""Lagrangian formalism, Noether identities and first integrals for second-order delay ODEs."""

__version__ = "0.1.0"
