"""Console output utilities for safe printing across platforms.

This module provides utilities for printing to console that handle
encoding issues on Windows and other platforms.
"""

ASCII_FALLBACKS = {
    "∇²": "del^2 ",
    "∇": "del ",
    "²": "^2",
    "Δ": "d",
    "τ": "tau",
    "λ": "lambda",
    "ρ": "rho",
    "α": "alpha",
    "κ": "kappa",
    "θ": "theta",
    "ν": "nu",
    "≤": "<=",
    "≥": ">=",
    "≈": "~",
    "∞": "inf",
    "±": "+/-",
    "·": "*",
    "×": "x",
    "✓": "[OK]",
    "✗": "[FAIL]",
    "⚠": "[WARNING]",
}


def to_ascii(text: str) -> str:
    """Replace math symbols by ASCII spellings and drop any other non-ASCII character."""
    for symbol, replacement in ASCII_FALLBACKS.items():
        text = text.replace(symbol, replacement)
    return text.encode("ascii", errors="ignore").decode("ascii")


def safe_print(*args, **kwargs):
    """Print to console with fallback for encoding issues.

    This function attempts to print normally, but falls back to ASCII
    if the console doesn't support UTF-8 characters (common on Windows).

    Args:
        *args: Positional arguments to print
        **kwargs: Keyword arguments for print()
    """
    try:
        print(*args, **kwargs)
    except UnicodeEncodeError:
        safe_args = [to_ascii(arg) if isinstance(arg, str) else str(arg) for arg in args]
        print(*safe_args, **kwargs)


def print_separator(char="=", width=80):
    """Print a separator line.

    Args:
        char: Character to use for the separator
        width: Width of the separator line
    """
    safe_print(char * width)


def print_section(text: str, width: int = 80):
    """Print a formatted section header.

    Args:
        text: Section text
        width: Width of the section
    """
    print_separator("=", width)
    safe_print(text)
    print_separator("=", width)
