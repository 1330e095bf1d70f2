"""Computational services: lattice operators, geometry, bodies, engine and suites."""
