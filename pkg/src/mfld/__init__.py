"""Mean-field Langevin particle dynamics with coreset-thinned interactions."""

__version__ = "0.1.0"
