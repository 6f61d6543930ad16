"""Tokenizer for Morphgen source text.

Physical lines are scanned with a single regular expression into lark ``Token`` objects; block
structure is then derived from leading-space counts by an ``Indenter`` post-processor that emits
``INDENT``/``DEDENT`` tokens. Blank lines and ``//`` comments produce no tokens, and a line ending
in ``...`` continues on the next physical line.
"""

from __future__ import annotations

import re
from collections.abc import Iterator

from lark import Token
from lark.indenter import Indenter

from src.morphgen.errors import (
    IndentationMismatch,
    MixedIndentation,
    MorphgenSyntaxError,
    UnexpectedCharacter,
    UnterminatedString,
)

KEYWORDS = frozenset(
    {
        "morphogenetic",
        "program",
        "end",
        "simulation",
        "substance",
        "behavior",
        "scalar",
        "vector",
        "field",
        "fields",
        "param",
        "params",
        "let",
        "body",
        "of",
        "for",
        "within",
        "visualization",
        "display",
        "make",
        "report",
        "save",
        "load",
        "log",
        "duration",
        "space",
        "del",
        "div",
        "DW",
        "and",
        "or",
        "is",
        "with",
    }
)

# Operator lexeme -> token type, longest lexemes first.
OPERATORS = {
    "+=": "PLUSEQ",
    "-=": "MINUSEQ",
    "<=": "LESSEQ",
    ">=": "MOREEQ",
    "||": "DBLBAR",
    "+": "PLUS",
    "-": "MINUS",
    "*": "STAR",
    "/": "SLASH",
    "^": "CIRCUMFLEX",
    "(": "LPAR",
    ")": "RPAR",
    "[": "LSQB",
    "]": "RSQB",
    ",": "COMMA",
    ":": "COLON",
    "=": "EQUAL",
    "<": "LESSTHAN",
    ">": "MORETHAN",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<NUMBER>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<PATH>(?:\.{1,2}/)?(?:[A-Za-z_][\w\-]*/)*[A-Za-z_][\w\-]*\.[A-Za-z][A-Za-z0-9]*)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<OP>\+=|-=|<=|>=|\|\||[-+*/^()\[\],:=<>])
  | (?P<OTHER>[!#$%&'?@\\`{}|~;.])
    """,
    re.VERBOSE,
)


class MorphgenIndenter(Indenter):
    """Indenter following the off-side rule.

    A line indented less than the current block but more than the enclosing one closes the
    current block and opens a sibling block at the new column, so the ``behavior:`` layout of
    the published listings (fields deeper than ``behavior``) is accepted.
    """

    NL_type = "NEWLINE"
    OPEN_PAREN_types = ["LPAR", "LSQB"]
    CLOSE_PAREN_types = ["RPAR", "RSQB"]
    INDENT_type = "INDENT"
    DEDENT_type = "DEDENT"
    tab_len = 8

    def handle_NL(self, token: Token) -> Iterator[Token]:
        if self.paren_level > 0:
            return
        yield token
        indent = len(token.rsplit("\n", 1)[1])
        if indent > self.indent_level[-1]:
            self.indent_level.append(indent)
            yield Token.new_borrow_pos(self.INDENT_type, "", token)
            return
        while indent < self.indent_level[-1]:
            self.indent_level.pop()
            yield Token.new_borrow_pos(self.DEDENT_type, "", token)
        if indent > self.indent_level[-1]:
            self.indent_level.append(indent)
            yield Token.new_borrow_pos(self.INDENT_type, "", token)


def _make(kind: str, value: str, offset: int, line: int, col: int) -> Token:
    return Token(
        kind,
        value,
        start_pos=offset,
        line=line,
        column=col,
        end_line=line,
        end_column=col + len(value),
        end_pos=offset + len(value),
    )


def _is_continuation(text: str, col: int) -> bool:
    if not text.startswith("...", col):
        return False
    rest = text[col + 3 :].strip()
    return rest == "" or rest.startswith("//")


def _scan(source: str) -> Iterator[Token]:
    """Yield raw tokens and one NEWLINE per logical line (indentation in its value)."""
    offset = 0
    emitted = False
    continuing = False
    last_end = (1, 1, 0)

    for lineno, text in enumerate(source.splitlines(keepends=True), start=1):
        line_offset = offset
        offset += len(text)
        text = text.rstrip("\r\n")
        stripped = text.lstrip(" \t")
        if not stripped or stripped.startswith("//"):
            continue
        lead = text[: len(text) - len(stripped)]
        if "\t" in lead and not continuing:
            raise MixedIndentation("tab in indentation", lineno, lead.index("\t") + 1)

        if not continuing:
            if emitted:
                line, col, pos = last_end
                yield _make("NEWLINE", "\n" + " " * len(lead), pos, line, col)
            elif lead:
                raise IndentationMismatch("unexpected indentation", lineno, len(lead) + 1)
        continuing = False

        col = len(lead)
        line_tokens: list[Token] = []
        while col < len(text):
            ch = text[col]
            if ch in " \t":
                col += 1
                continue
            if text.startswith("//", col):
                break
            if _is_continuation(text, col):
                continuing = True
                break
            if ch == '"':
                close = text.find('"', col + 1)
                if close < 0:
                    raise UnterminatedString("unterminated string", lineno, col + 1)
                tok = _make("STRING", text[col + 1 : close], line_offset + col, lineno, col + 1)
                line_tokens.append(tok)
                col = close + 1
                continue
            if (
                len(line_tokens) >= 2
                and line_tokens[-1].type == "IDENT"
                and line_tokens[-1] == "note"
                and line_tokens[-2].type == "KEYWORD"
                and line_tokens[-2] == "log"
            ):
                note = text[col:].rstrip()
                line_tokens.append(_make("TEXT", note, line_offset + col, lineno, col + 1))
                col = len(text)
                break

            match = _TOKEN_RE.match(text, col)
            if match is None:
                raise UnexpectedCharacter(f"unexpected character {ch!r}", lineno, col + 1)
            kind = match.lastgroup
            value = match.group()
            if kind == "IDENT" and value in KEYWORDS:
                kind = "KEYWORD"
            elif kind == "OP":
                kind = OPERATORS[value]
            line_tokens.append(_make(kind, value, line_offset + col, lineno, col + 1))
            col = match.end()

        for tok in line_tokens:
            yield tok
            emitted = True
        if line_tokens:
            last = line_tokens[-1]
            last_end = (last.end_line, last.end_column, last.end_pos)

    if emitted:
        line, col, pos = last_end
        yield _make("NEWLINE", "\n", pos, line, col)


def tokenize(source: str) -> list[Token]:
    """Tokenize Morphgen source text.

    Args:
        source: Program text.

    Returns:
        Token list with balanced INDENT/DEDENT tokens. Token types are ``KEYWORD``, ``IDENT``,
        ``NUMBER``, ``STRING``, ``PATH``, ``TEXT``, one type per operator (``PLUS``, ``LSQB``,
        ...), ``OTHER``, ``NEWLINE``, ``INDENT`` and ``DEDENT``.

    Raises:
        MixedIndentation: A tab appears in leading whitespace.
        UnterminatedString: A string is not closed on its line.
        UnexpectedCharacter: A character starts no token.
        MorphgenSyntaxError: A closing bracket has no opening partner.
    """
    try:
        return list(MorphgenIndenter().process(_scan(source)))
    except AssertionError as exc:
        raise MorphgenSyntaxError("]", ["balanced brackets"]) from exc
