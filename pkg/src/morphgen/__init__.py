"""Morphgen Toolchain Package.

Compiler and simulators for the Morphgen morphogenetic programming language.
"""

__version__ = "0.13.0"
