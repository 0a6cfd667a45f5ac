"""Numerical laboratory for operators with compactly supported spreading functions."""
