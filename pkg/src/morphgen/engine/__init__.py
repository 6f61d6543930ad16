"""Field Engine Package.

Explicit-Euler finite-difference execution of compiled models on a uniform 2D grid.
"""
