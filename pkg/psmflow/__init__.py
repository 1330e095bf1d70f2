# Partially saturated cells lattice Boltzmann solver
__version__ = "0.1.0"
