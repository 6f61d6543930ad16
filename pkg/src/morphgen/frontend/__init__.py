"""Frontend Package.

Tokenizer, parser and pretty printer for Morphgen source text.
"""
