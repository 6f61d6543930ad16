"""Command Line Package."""
