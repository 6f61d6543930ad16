"""Semantic Analysis Package.

Name resolution, equation merging, constant folding and kind checking.
"""
