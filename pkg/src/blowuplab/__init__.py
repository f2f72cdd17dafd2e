"""Blow-up laboratory for the 1D semilinear wave equation."""
