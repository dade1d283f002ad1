"""Spectral building blocks: transforms, elliptic solves, linear propagator."""
