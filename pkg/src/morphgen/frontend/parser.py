"""Recursive-descent parser producing a ``ProgramAst`` from a token list."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

from lark import Token

from src.morphgen.errors import (
    EmptyBracket,
    InvalidSimulationParameter,
    MorphgenSyntaxError,
    SectionOrderError,
    SubstanceDerivationError,
)
from src.morphgen.frontend.ast import (
    AssignStmt,
    BinOp,
    BodyAst,
    BoolOp,
    Box,
    Call,
    ChangeStmt,
    Compare,
    Cond,
    Disc,
    Display,
    Divergence,
    Expr,
    FieldDecl,
    FieldInit,
    FileDirective,
    Grad,
    Group,
    Heaviside,
    Init,
    KindSpec,
    Lapl,
    LetDef,
    Movie,
    Name,
    Neg,
    Noise,
    Norm,
    Num,
    ParamDef,
    Pow,
    ProgramAst,
    Region,
    SimParamsAst,
    StabilityReportCmd,
    Stmt,
    SubstanceAst,
    Time,
    VizCmd,
)
from src.morphgen.frontend.lexer import tokenize

logger = logging.getLogger(__name__)

COMPARISONS = {"LESSTHAN": "<", "LESSEQ": "<=", "MORETHAN": ">", "MOREEQ": ">="}
CHANGE_MODES = {"EQUAL": "assign", "PLUSEQ": "add", "MINUSEQ": "sub"}
SECTION_RANKS = {"simulation": 0, "substance": 1, "body": 2, "visualization": 3}
SECTION_NAMES = ["simulation parameters", "substance", "body", "visualization"]
SCALAR_KINDS = ("mesh", "contours", "colors")

_DESCRIPTIONS = {
    "IDENT": "identifier",
    "NUMBER": "number",
    "STRING": "string",
    "PATH": "filename",
    "TEXT": "text",
    "NEWLINE": "newline",
    "INDENT": "indent",
    "DEDENT": "dedent",
}


def _describe(kind: str, value: str | None = None) -> str:
    if value is not None:
        return f"'{value}'"
    return _DESCRIPTIONS.get(kind, kind.lower())


class Parser:
    """Recursive-descent parser over a token list.

    The parser keeps a cursor into ``tokens``; sub-parsers are created for the contents of
    square brackets once the bracket has been classified.
    """

    def __init__(self, tokens: Sequence[Token]):
        self.tokens = list(tokens)
        self.pos = 0
        self.norm_depth = 0

    # --- cursor ----------------------------------------------------------------------------

    def peek(self, offset: int = 0) -> Token | None:
        index = self.pos + offset
        return self.tokens[index] if index < len(self.tokens) else None

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def advance(self) -> Token:
        token = self.peek()
        if token is None:
            raise self.error(["more input"])
        self.pos += 1
        return token

    def check(self, kind: str, value: str | None = None, offset: int = 0) -> bool:
        token = self.peek(offset)
        if token is None or token.type != kind:
            return False
        return value is None or token.value == value

    def check_word(self, word: str, offset: int = 0) -> bool:
        """True if the token is ``word`` as a keyword or a contextual identifier."""
        token = self.peek(offset)
        return token is not None and token.type in ("KEYWORD", "IDENT") and token.value == word

    def match(self, kind: str, value: str | None = None) -> Token | None:
        if self.check(kind, value):
            return self.advance()
        return None

    def match_word(self, word: str) -> Token | None:
        if self.check_word(word):
            return self.advance()
        return None

    def expect(self, kind: str, value: str | None = None) -> Token:
        if self.check(kind, value):
            return self.advance()
        raise self.error([_describe(kind, value)])

    def expect_word(self, word: str) -> Token:
        if self.check_word(word):
            return self.advance()
        raise self.error([f"'{word}'"])

    def expect_end(self) -> None:
        while self.match("NEWLINE"):
            pass
        if not self.at_end():
            raise self.error(["end of input"])

    def error(self, expected: Sequence[str]) -> MorphgenSyntaxError:
        token = self.peek()
        if token is None:
            last = self.tokens[-1] if self.tokens else None
            line = getattr(last, "end_line", None)
            col = getattr(last, "end_column", None)
            return MorphgenSyntaxError("", expected, line, col)
        found = "newline" if token.type == "NEWLINE" else token.value or token.type.lower()
        return MorphgenSyntaxError(found, expected, token.line, token.column)

    def block(self, line: Callable[[], None]) -> None:
        """Parse an indented block, calling ``line`` once per content line.

        A DEDENT immediately followed by an INDENT marks a sibling block opened at a column
        between two enclosing levels; it continues the current block.
        """
        if not self.match("INDENT"):
            return
        depth = 1
        while depth > 0:
            if self.match("INDENT"):
                depth += 1
            elif self.match("DEDENT"):
                if not self.match("INDENT"):
                    depth -= 1
            elif self.at_end():
                raise self.error(["dedent"])
            else:
                line()

    def end_line(self) -> None:
        if self.at_end():
            return
        self.expect("NEWLINE")

    # --- program ---------------------------------------------------------------------------

    def parse_program(self) -> ProgramAst:
        while self.match("NEWLINE"):
            pass
        head = self.expect_word("morphogenetic")
        self.expect_word("program")
        name = self.expect("IDENT").value
        self.expect("COLON")
        self.end_line()

        sections: dict[str, list] = {"sim": [], "substance": [], "body": [], "viz": []}
        state = {"rank": -1}

        def section() -> None:
            token = self.peek()
            word = token.value if token is not None else ""
            rank = SECTION_RANKS.get(word)
            if rank is None or token.type != "KEYWORD":
                raise self.error([f"'{s.split()[0]}'" for s in SECTION_NAMES])
            repeated = rank in (0, 3) and rank == state["rank"]
            if rank < state["rank"] or repeated:
                raise SectionOrderError(
                    f"'{SECTION_NAMES[rank]}' section out of order: expected sections in the "
                    f"order {', '.join(SECTION_NAMES)}",
                    token.line,
                    token.column,
                )
            state["rank"] = rank
            if rank == 0:
                sections["sim"].append(self.parse_sim_params())
            elif rank == 1:
                sections["substance"].append(self.parse_substance())
            elif rank == 2:
                sections["body"].append(self.parse_body())
            else:
                sections["viz"].extend(self.parse_visualization())

        if self.check("INDENT"):
            self.block(section)
        else:
            while not self.at_end() and not self.check_word("end"):
                section()
        if self.match_word("end"):
            self.expect_word("program")
            self.end_line()
        self.expect_end()

        sim_params = sections["sim"][0] if sections["sim"] else SimParamsAst()
        program = ProgramAst(
            name=name,
            sim_params=sim_params,
            substances=tuple(sections["substance"]),
            bodies=tuple(sections["body"]),
            viz=tuple(sections["viz"]),
            line=head.line,
            col=head.column,
        )
        logger.debug(
            f"Parsed program '{name}': {len(program.substances)} substances, "
            f"{len(program.bodies)} bodies, {len(program.viz)} visualization commands"
        )
        return program

    # --- simulation parameters -------------------------------------------------------------

    def parse_sim_params(self) -> SimParamsAst:
        head = self.expect_word("simulation")
        if not (self.match_word("parameters") or self.match_word("params")):
            raise self.error(["'parameters'"])
        self.expect("COLON")
        self.end_line()

        values: dict[str, object] = {}
        saves: list[FileDirective] = []
        loads: list[FileDirective] = []
        log_params: list[str] = []
        notes: list[str] = []
        params: list[ParamDef] = []

        def assign(key: str, token: Token) -> None:
            if key in values:
                raise InvalidSimulationParameter(
                    f"{key.replace('_', ' ')} given more than once", token.line, token.column
                )
            self.expect("EQUAL")
            values[key] = self.parse_expression()
            self.end_line()

        def line() -> None:
            token = self.peek()
            if self.match_word("duration"):
                assign("duration", token)
            elif self.check_word("temporal") or self.check_word("spatial"):
                which = self.advance().value
                self.expect_word("resolution")
                assign(f"{which}_resolution", token)
            elif self.match_word("space"):
                if "space" in values:
                    raise InvalidSimulationParameter(
                        "space given more than once", token.line, token.column
                    )
                values["space"] = self.parse_box(token)
                self.end_line()
            elif self.match_word("save"):
                saves.append(self.parse_file_directive("to", token))
            elif self.match_word("load"):
                loads.append(self.parse_file_directive("from", token))
            elif self.match_word("log"):
                if self.match_word("note"):
                    text = self.match("TEXT")
                    notes.append(text.value if text else "")
                else:
                    if not self.match_word("params"):
                        raise self.error(["'params'", "'note'"])
                    log_params.append(self.expect("IDENT").value)
                    while self.match("COMMA"):
                        log_params.append(self.expect("IDENT").value)
                self.end_line()
            elif self.check_word("param") or self.check_word("params"):
                params.extend(
                    s for s in self.parse_statement() if isinstance(s, ParamDef)
                )
            else:
                raise self.error(
                    [
                        "'duration'",
                        "'temporal'",
                        "'spatial'",
                        "'space'",
                        "'save'",
                        "'load'",
                        "'log'",
                        "'param'",
                        "'params'",
                    ]
                )

        self.block(line)
        return SimParamsAst(
            duration=values.get("duration"),
            temporal_resolution=values.get("temporal_resolution"),
            spatial_resolution=values.get("spatial_resolution"),
            space=values.get("space"),
            saves=tuple(saves),
            loads=tuple(loads),
            log_params=tuple(log_params),
            notes=tuple(notes),
            params=tuple(params),
            line=head.line,
            col=head.column,
        )

    def parse_file_directive(self, preposition: str, head: Token) -> FileDirective:
        fields = [self.expect("IDENT").value]
        while not self.check_word(preposition):
            self.match("COMMA")
            fields.append(self.expect("IDENT").value)
        self.expect_word(preposition)
        filename = self.parse_filename()
        self.end_line()
        return FileDirective(tuple(fields), filename, line=head.line, col=head.column)

    def parse_filename(self) -> str:
        for kind in ("PATH", "STRING", "IDENT"):
            token = self.match(kind)
            if token is not None:
                return token.value
        raise self.error(["filename"])

    # --- substances ------------------------------------------------------------------------

    def parse_substance(self) -> SubstanceAst:
        head = self.expect_word("substance")
        name = self.expect("IDENT").value
        if self.check_word("is"):
            token = self.peek()
            raise SubstanceDerivationError(
                f"substance derivation ('{name} is ...') is not supported",
                token.line,
                token.column,
            )
        self.expect("COLON")
        self.end_line()

        decls: list[FieldDecl] = []
        behavior: list[Stmt] = []
        seen = {"behavior": False}

        def line() -> None:
            if not seen["behavior"] and self.match_word("behavior"):
                seen["behavior"] = True
                self.expect("COLON")
                self.end_line()
                self.block(lambda: behavior.extend(self.parse_statement()))
            elif seen["behavior"]:
                raise self.error(["dedent"])
            else:
                decls.extend(self.parse_field_decl())

        self.block(line)
        return SubstanceAst(name, tuple(decls), tuple(behavior), line=head.line, col=head.column)

    def parse_field_decl(self) -> list[FieldDecl]:
        token = self.peek()
        if not (self.check_word("scalar") or self.check_word("vector")):
            raise self.error(["'scalar'", "'vector'", "'behavior'"])
        kind = self.advance().value
        if self.match_word("field"):
            name = self.expect("IDENT")
            self.end_line()
            return [FieldDecl(name.value, kind, line=name.line, col=name.column)]
        if not self.match_word("fields"):
            raise self.error(["'field'", "'fields'"])
        self.expect("COLON")
        self.end_line()
        decls: list[FieldDecl] = []

        def line() -> None:
            name = self.expect("IDENT")
            decls.append(FieldDecl(name.value, kind, line=name.line, col=name.column))
            self.end_line()

        self.block(line)
        if not decls:
            raise MorphgenSyntaxError(
                "newline", ["indented field names"], token.line, token.column
            )
        return decls

    def parse_statement(self) -> list[Stmt]:
        token = self.peek()
        if self.match_word("param"):
            name = self.expect("IDENT").value
            self.expect("EQUAL")
            expr = self.parse_expression()
            self.end_line()
            return [ParamDef(name, expr, line=token.line, col=token.column)]
        if self.match_word("params"):
            self.expect("COLON")
            self.end_line()
            params: list[Stmt] = []

            def line() -> None:
                name = self.expect("IDENT")
                self.expect("EQUAL")
                expr = self.parse_expression()
                self.end_line()
                params.append(ParamDef(name.value, expr, line=name.line, col=name.column))

            self.block(line)
            return params
        if self.match_word("let"):
            name = self.expect("IDENT").value
            self.expect("EQUAL")
            expr = self.parse_expression()
            self.end_line()
            return [LetDef(name, expr, line=token.line, col=token.column)]
        if (
            self.check("IDENT", "D")
            and self.check("IDENT", offset=1)
            and (self.peek(2) is not None and self.peek(2).type in CHANGE_MODES)
        ):
            self.advance()
            target = self.advance().value
            mode = CHANGE_MODES[self.advance().type]
            rhs = self.parse_expression()
            self.end_line()
            return [ChangeStmt(target, mode, rhs, line=token.line, col=token.column)]
        if self.check("IDENT") and self.check("EQUAL", offset=1):
            target = self.advance().value
            self.advance()
            rhs = self.parse_expression()
            self.end_line()
            return [AssignStmt(target, rhs, line=token.line, col=token.column)]
        raise self.error(["'param'", "'params'", "'let'", "'D'", "identifier"])

    # --- bodies ----------------------------------------------------------------------------

    def parse_body(self) -> BodyAst:
        head = self.expect_word("body")
        name = self.expect("IDENT").value
        self.expect_word("of")
        substance = self.expect("IDENT").value
        self.match("COLON")
        self.end_line()
        inits: list[Init] = []

        def line() -> None:
            inits.append(self.parse_init())

        self.block(line)
        return BodyAst(name, substance, tuple(inits), line=head.line, col=head.column)

    def parse_init(self) -> Init:
        head = self.expect_word("for")
        region = self.parse_region(head)
        self.expect("COLON")
        assignments: list[FieldInit] = []
        if self.match("NEWLINE"):

            def line() -> None:
                assignments.append(self.parse_field_init())
                while self.match("COMMA"):
                    assignments.append(self.parse_field_init())
                self.end_line()

            self.block(line)
            if not assignments:
                raise MorphgenSyntaxError(
                    "newline", ["indented initializations"], head.line, head.column
                )
        else:
            assignments.append(self.parse_field_init())
            while self.match("COMMA"):
                assignments.append(self.parse_field_init())
            self.end_line()
        return Init(region, tuple(assignments), line=head.line, col=head.column)

    def parse_field_init(self) -> FieldInit:
        name = self.expect("IDENT")
        self.expect("EQUAL")
        return FieldInit(name.value, self.parse_expression(), line=name.line, col=name.column)

    def parse_region(self, head: Token) -> Region:
        if (
            self.check("LPAR")
            and self.check("IDENT", offset=1)
            and self.check("COMMA", offset=2)
            and self.check("IDENT", offset=3)
            and self.check("RPAR", offset=4)
            and self.check_word("within", offset=5)
        ):
            return self.parse_disc(head)
        return self.parse_box(head)

    def parse_disc(self, head: Token) -> Disc:
        self.expect("LPAR")
        self.expect("IDENT", "x")
        self.expect("COMMA")
        self.expect("IDENT", "y")
        self.expect("RPAR")
        self.expect_word("within")
        radius = self.parse_expression()
        self.expect_word("of")
        self.expect("LPAR")
        cx = self.parse_expression()
        self.expect("COMMA")
        cy = self.parse_expression()
        self.expect("RPAR")
        return Disc(cx, cy, radius, line=head.line, col=head.column)

    def parse_box(self, head: Token) -> Box:
        bounds = []
        for axis in ("x", "y"):
            if axis == "y":
                self.expect("COMMA")
            lo = self.parse_expression()
            self.expect("LESSTHAN")
            self.expect("IDENT", axis)
            self.expect("LESSTHAN")
            hi = self.parse_expression()
            bounds.extend((lo, hi))
        return Box(*bounds, line=head.line, col=head.column)

    # --- visualization ---------------------------------------------------------------------

    def parse_visualization(self) -> list[VizCmd]:
        self.expect_word("visualization")
        self.expect("COLON")
        self.end_line()
        commands: list[VizCmd] = []

        def line() -> None:
            commands.append(self.parse_viz_command())

        self.block(line)
        return commands

    def parse_viz_command(self) -> VizCmd:
        token = self.peek()
        if self.match_word("display"):
            if not (self.check_word("running") or self.check_word("final")):
                raise self.error(["'running'", "'final'"])
            time = self.advance().value
            field = self.expect("IDENT").value
            self.expect_word("as")
            kind = self.parse_kind()
            options = self.parse_options()
            return Display(time, field, kind, options, line=token.line, col=token.column)
        if self.match_word("make"):
            self.expect_word("movie")
            filename = self.parse_filename()
            self.expect_word("of")
            field = self.expect("IDENT").value
            self.expect_word("as")
            kind = self.parse_kind()
            options = self.parse_options()
            return Movie(filename, field, kind, options, line=token.line, col=token.column)
        if self.match_word("report"):
            if not any(self.check_word(k) for k in ("diffusion", "Courant", "Peclet")):
                raise self.error(["'diffusion'", "'Courant'", "'Peclet'"])
            kind = self.advance().value
            self.expect_word("number")
            self.expect_word("for")
            operands = [self.expect("IDENT").value]
            if kind == "Peclet":
                self.expect_word("and")
                operands.append(self.expect("IDENT").value)
            self.end_line()
            return StabilityReportCmd(kind, tuple(operands), line=token.line, col=token.column)
        raise self.error(["'display'", "'make'", "'report'"])

    def parse_kind(self) -> KindSpec:
        if any(self.check_word(k) for k in SCALAR_KINDS):
            name = self.advance().value
            limits = None
            if self.match_word("limits"):
                self.expect("LPAR")
                lo = self.parse_expression()
                self.expect("COMMA")
                hi = self.parse_expression()
                self.expect("RPAR")
                limits = (lo, hi)
            return KindSpec(name, limits=limits)
        if self.match_word("quivers"):
            pitch = None
            if not self.check("NEWLINE") and not self.at_end():
                mark = self.pos
                try:
                    candidate = self.parse_expression()
                except MorphgenSyntaxError:
                    candidate = None
                if candidate is not None and self.match_word("mesh"):
                    pitch = candidate
                else:
                    self.pos = mark
            return KindSpec("quivers", pitch=pitch)
        raise self.error([f"'{k}'" for k in (*SCALAR_KINDS, "quivers")])

    def parse_options(self) -> str:
        words = []
        while not self.at_end() and not self.check("NEWLINE"):
            token = self.advance()
            words.append(f'"{token.value}"' if token.type == "STRING" else token.value)
        self.end_line()
        return " ".join(words)

    # --- expressions -----------------------------------------------------------------------

    def parse_expression(self) -> Expr:
        return self.parse_sum()

    def parse_sum(self) -> Expr:
        left = self.parse_term()
        while self.check("PLUS") or self.check("MINUS"):
            op = self.advance()
            right = self.parse_term()
            left = BinOp(op.value, left, right, line=op.line, col=op.column)
        return left

    def parse_term(self) -> Expr:
        left = self.parse_unary()
        while True:
            if self.check("STAR") or self.check("SLASH"):
                op = self.advance()
                right = self.parse_unary()
                left = BinOp(op.value, left, right, line=op.line, col=op.column)
            elif self._juxtaposes():
                token = self.peek()
                right = self.parse_unary()
                left = BinOp("*", left, right, line=token.line, col=token.column)
            else:
                return left

    def _juxtaposes(self) -> bool:
        """Adjacent factors multiply: before ``[``, and after ``]`` before any primary."""
        following = self.peek()
        if following is None:
            return False
        if following.type == "LSQB":
            return True
        if self.pos == 0 or self.tokens[self.pos - 1].type != "RSQB":
            return False
        if following.type in ("NUMBER", "IDENT", "LPAR"):
            return True
        if following.type == "DBLBAR":
            # inside a norm the bar closes it
            return self.norm_depth == 0
        if following.type == "KEYWORD" and following.value in ("del", "div"):
            return True
        if following.type == "MINUS":
            previous = self.tokens[self.pos - 1]
            after = self.peek(1)
            if after is None or after.start_pos is None or following.start_pos is None:
                return False
            return following.start_pos > previous.end_pos and after.start_pos == following.end_pos
        return False

    def parse_unary(self) -> Expr:
        token = self.peek()
        if self.match("MINUS"):
            return Neg(self.parse_unary(), line=token.line, col=token.column)
        if self.match("PLUS"):
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_field_op()
        token = self.match("CIRCUMFLEX")
        if token is None:
            return base
        return Pow(base, self.parse_unary(), line=token.line, col=token.column)

    def parse_field_op(self) -> Expr:
        token = self.peek()
        if self.match("KEYWORD", "del"):
            if self.check("CIRCUMFLEX") and self.check("NUMBER", "2", offset=1):
                self.pos += 2
                return Lapl(self.parse_field_op(), line=token.line, col=token.column)
            return Grad(self.parse_field_op(), line=token.line, col=token.column)
        if self.match("KEYWORD", "div"):
            return Divergence(self.parse_field_op(), line=token.line, col=token.column)
        return self.parse_primary()

    def parse_primary(self) -> Expr:
        token = self.peek()
        if token is None:
            raise self.error(["expression"])
        if self.match("NUMBER"):
            return Num(float(token.value), token.value, line=token.line, col=token.column)
        if self.check("IDENT"):
            self.advance()
            if self.match("LPAR"):
                args: list[Expr] = []
                if not self.check("RPAR"):
                    args.append(self.parse_expression())
                    while self.match("COMMA"):
                        args.append(self.parse_expression())
                self.expect("RPAR")
                return Call(token.value, tuple(args), line=token.line, col=token.column)
            if token.value == "t":
                return Time(line=token.line, col=token.column)
            return Name(token.value, line=token.line, col=token.column)
        if self.match("LPAR"):
            inner = self.parse_expression()
            self.expect("RPAR")
            return inner
        if self.match("DBLBAR"):
            self.norm_depth += 1
            try:
                inner = self.parse_expression()
            finally:
                self.norm_depth -= 1
            self.expect("DBLBAR")
            return Norm(inner, line=token.line, col=token.column)
        if self.check("LSQB"):
            return self.parse_bracket()
        raise self.error(["expression"])

    def parse_bracket(self) -> Expr:
        """Classify and parse ``[...]`` as a noise term, Heaviside factor or grouping."""
        open_token = self.advance()
        start = self.pos
        depth = 0
        close = None
        noise_at = None
        conditional = False
        for index in range(start, len(self.tokens)):
            kind = self.tokens[index].type
            if kind in ("LSQB", "LPAR"):
                depth += 1
            elif kind in ("RSQB", "RPAR"):
                if depth == 0:
                    if kind == "RSQB":
                        close = index
                    break
                depth -= 1
            elif depth == 0:
                if kind == "KEYWORD" and self.tokens[index].value == "DW":
                    noise_at = index if noise_at is None else noise_at
                elif kind in COMPARISONS or (
                    kind == "KEYWORD" and self.tokens[index].value in ("and", "or")
                ):
                    conditional = True
        if close is None:
            self.pos = start
            while not self.at_end() and not self.check("RSQB") and not self.check("NEWLINE"):
                self.advance()
            raise self.error(["']'"])
        inner = self.tokens[start:close]
        self.pos = close + 1
        line, col = open_token.line, open_token.column
        if not inner:
            raise EmptyBracket("empty bracket '[]'", line, col)

        if noise_at is not None:
            weight_tokens = self.tokens[start:noise_at]
            if weight_tokens and weight_tokens[-1].type == "STAR":
                weight_tokens = weight_tokens[:-1]
            weight = None
            if weight_tokens:
                sub = Parser(weight_tokens)
                weight = sub.parse_expression()
                sub.expect_end()
            rest = self.tokens[noise_at + 1 : close]
            arity = 1
            if rest:
                if (
                    len(rest) == 2
                    and rest[0].type == "CIRCUMFLEX"
                    and rest[1].type == "NUMBER"
                    and rest[1].value in ("1", "2")
                ):
                    arity = int(rest[1].value)
                else:
                    raise MorphgenSyntaxError(
                        rest[0].value, ["'DW^1'", "'DW^2'"], rest[0].line, rest[0].column
                    )
            return Noise(weight, arity, line=line, col=col)

        sub = Parser(inner)
        if conditional:
            cond = sub.parse_condition()
            sub.expect_end()
            return Heaviside(cond, line=line, col=col)
        expr = sub.parse_expression()
        sub.expect_end()
        return Group(expr, line=line, col=col)

    def parse_condition(self) -> Cond:
        left = self.parse_conjunction()
        while True:
            token = self.match("KEYWORD", "or")
            if token is None:
                return left
            left = BoolOp("or", left, self.parse_conjunction(), line=token.line, col=token.column)

    def parse_conjunction(self) -> Cond:
        left = self.parse_chain()
        while True:
            token = self.match("KEYWORD", "and")
            if token is None:
                return left
            left = BoolOp("and", left, self.parse_chain(), line=token.line, col=token.column)

    def parse_chain(self) -> Cond:
        """``a < b <= c`` is read as ``a < b and b <= c``."""
        left = self.parse_expression()
        token = self.peek()
        if token is None or token.type not in COMPARISONS:
            raise self.error(["'<'", "'<='", "'>'", "'>='"])
        result: Cond | None = None
        while token is not None and token.type in COMPARISONS:
            self.advance()
            right = self.parse_expression()
            comparison = Compare(
                COMPARISONS[token.type], left, right, line=token.line, col=token.column
            )
            result = (
                comparison
                if result is None
                else BoolOp("and", result, comparison, line=token.line, col=token.column)
            )
            left = right
            token = self.peek()
        return result


def parse(tokens: Sequence[Token]) -> ProgramAst:
    """Parse a token stream into a program.

    Args:
        tokens: Output of ``tokenize``.

    Returns:
        The program's syntax tree.

    Raises:
        MorphgenSyntaxError: Unexpected token, with the set of acceptable ones.
        SectionOrderError: Sections are not in the order sim params, substances, bodies,
            visualization.
        EmptyBracket: ``[]`` appears in an expression.
        SubstanceDerivationError: ``substance X is ...`` was used.
    """
    return Parser(tokens).parse_program()


def parse_expr(tokens: Sequence[Token]) -> Expr:
    """Parse tokens forming a single expression (trailing newlines allowed)."""
    parser = Parser(tokens)
    expr = parser.parse_expression()
    parser.expect_end()
    return expr


def parse_source(source: str) -> ProgramAst:
    """Tokenize and parse program text."""
    return parse(tokenize(source))


def parse_expr_source(source: str) -> Expr:
    """Tokenize and parse the text of a single expression."""
    return parse_expr(tokenize(source))
