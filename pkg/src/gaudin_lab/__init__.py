"""Classical Gaudin models in 0+1 and 1+1 dimensions: special functions, Lax pairs, flows and conserved densities."""

__version__ = "0.1.0"
