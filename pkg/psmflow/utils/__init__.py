"""Utility modules for the psmflow solver."""
