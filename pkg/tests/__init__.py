"""Test package for psmflow."""
