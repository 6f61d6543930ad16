"""IO and Visualization Package.

Field archives, frame rendering and movie frame output.
"""
