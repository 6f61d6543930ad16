"""Corpus Package.

Loader for the bundled Morphgen programs and regression metrics for their runs.
"""
