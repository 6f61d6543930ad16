"""Shared Utilities Package.

Settings, logging, console output and run records shared by every command.
"""
