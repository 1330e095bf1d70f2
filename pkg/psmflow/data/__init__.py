"""Bundled parameter files."""
