"""Double-well Schrodinger spectra and phi^4 path-measure Monte Carlo."""

from .potential import NumericFailure, Potential, quartic_potential

__all__ = ["NumericFailure", "Potential", "quartic_potential"]

__version__ = "0.1.0"
