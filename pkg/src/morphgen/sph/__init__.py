"""SPH Backend Package.

Compilation of field models to per-agent rules and simulation of agent worlds.
"""
