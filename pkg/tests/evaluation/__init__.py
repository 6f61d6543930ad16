"""Evaluation Tests Package.

Contains LLM-as-a-Judge scripts for quality gates.
"""
