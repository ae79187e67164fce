"""thermolim - thermodynamic-limit laboratory for energies of bounded domains."""

__version__ = "0.1.0"
