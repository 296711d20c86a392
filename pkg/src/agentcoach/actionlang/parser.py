"""Recursive-descent parser for the action language.

Grammar (statements separated by newlines, at most 32 per program):

    statement  := IDENT '=' expr | expr
    expr       := comparison
    comparison := additive (('<'|'<='|'>'|'>='|'=='|'!=') additive)?
    additive   := term (('+'|'-') term)*
    term       := unary (('*'|'/') unary)*
    unary      := '-' unary | postfix
    postfix    := primary ('[' expr ']')*
    primary    := NUMBER | STRING | 'true' | 'false' | IDENT
                | IDENT '(' args ')' | '[' args ']' | '(' expr ')'
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

MAX_STATEMENTS = 32

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = expected
        suffix = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"line {line}, column {column}: {message}{suffix}")


# --- AST nodes ---------------------------------------------------------------


@dataclass(frozen=True)
class NumberLit:
    value: float


@dataclass(frozen=True)
class StringLit:
    value: str


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Name:
    ident: str


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class ListLit:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[NumberLit, StringLit, BoolLit, Name, Call, ListLit, Index, BinOp, Neg]


@dataclass(frozen=True)
class Assignment:
    name: str
    expr: Expr


@dataclass(frozen=True)
class ExprStatement:
    expr: Expr


Statement = Union[Assignment, ExprStatement]


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...]
    source: str


# --- Lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<dstring>"(?:[^"\\]|\\.)*")
  | (?P<sstring>'(?:[^'\\]|\\.)*')
  | (?P<op><=|>=|==|!=|[-+*/<>=()\[\],])
    """,
    re.VERBOSE,
)

_ESCAPES = {"\\n": "\n", "\\t": "\t", "\\'": "'", '\\"': '"', "\\\\": "\\"}


def _unescape(body: str) -> str:
    return re.sub(r"\\.", lambda m: _ESCAPES.get(m.group(0), m.group(0)[1]), body)


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | string | op | end
    text: str
    value: object
    line: int
    column: int


def _lex_line(text: str, line_no: int) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line_no, pos + 1)
        kind = m.lastgroup
        if kind != "ws":
            col = pos + 1
            raw = m.group(0)
            if kind == "number":
                tokens.append(Token("number", raw, float(raw), line_no, col))
            elif kind == "ident":
                tokens.append(Token("ident", raw, raw, line_no, col))
            elif kind in ("dstring", "sstring"):
                tokens.append(Token("string", raw, _unescape(raw[1:-1]), line_no, col))
            else:
                tokens.append(Token("op", raw, raw, line_no, col))
        pos = m.end()
    tokens.append(Token("end", "", None, line_no, len(text) + 1))
    return tokens


# --- Parser ------------------------------------------------------------------

_COMPARE_OPS = ("<", "<=", ">", ">=", "==", "!=")


class _LineParser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.cur
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.cur.kind == "op" and self.cur.text == text:
            return self.advance()
        raise ParseError(
            f"unexpected {self.cur.text or 'end of line'!r}",
            self.cur.line,
            self.cur.column,
            expected=(text,),
        )

    def parse_statement(self) -> Statement:
        # lookahead: IDENT '=' (single '=' only) means assignment
        if (
            self.cur.kind == "ident"
            and self.i + 1 < len(self.tokens)
            and self.tokens[self.i + 1].kind == "op"
            and self.tokens[self.i + 1].text == "="
        ):
            name = self.advance().text
            self.advance()  # '='
            expr = self.parse_expr()
            self._expect_end()
            return Assignment(name, expr)
        expr = self.parse_expr()
        self._expect_end()
        return ExprStatement(expr)

    def _expect_end(self) -> None:
        if self.cur.kind != "end":
            raise ParseError(
                f"unexpected {self.cur.text!r} after expression",
                self.cur.line,
                self.cur.column,
                expected=("end of line",),
            )

    def parse_expr(self) -> Expr:
        left = self.parse_additive()
        if self.cur.kind == "op" and self.cur.text in _COMPARE_OPS:
            op = self.advance().text
            right = self.parse_additive()
            return BinOp(op, left, right)
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_term()
        while self.cur.kind == "op" and self.cur.text in ("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.parse_term())
        return left

    def parse_term(self) -> Expr:
        left = self.parse_unary()
        while self.cur.kind == "op" and self.cur.text in ("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.parse_unary())
        return left

    def parse_unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        base = self.parse_primary()
        while self.cur.kind == "op" and self.cur.text == "[":
            self.advance()
            index = self.parse_expr()
            self.expect("]")
            base = Index(base, index)
        return base

    def parse_primary(self) -> Expr:
        t = self.cur
        if t.kind == "number":
            self.advance()
            return NumberLit(t.value)  # type: ignore[arg-type]
        if t.kind == "string":
            self.advance()
            return StringLit(t.value)  # type: ignore[arg-type]
        if t.kind == "ident":
            if t.text == "true":
                self.advance()
                return BoolLit(True)
            if t.text == "false":
                self.advance()
                return BoolLit(False)
            self.advance()
            if self.cur.kind == "op" and self.cur.text == "(":
                self.advance()
                args = self._parse_args(")")
                return Call(t.text, args)
            return Name(t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        if t.kind == "op" and t.text == "[":
            self.advance()
            items = self._parse_args("]")
            return ListLit(items)
        raise ParseError(
            f"unexpected {t.text or 'end of line'!r}",
            t.line,
            t.column,
            expected=("literal", "identifier", "(", "["),
        )

    def _parse_args(self, closer: str) -> tuple[Expr, ...]:
        args: list[Expr] = []
        if self.cur.kind == "op" and self.cur.text == closer:
            self.advance()
            return tuple(args)
        while True:
            args.append(self.parse_expr())
            if self.cur.kind == "op" and self.cur.text == ",":
                self.advance()
                continue
            self.expect(closer)
            return tuple(args)


def parse(source: str) -> Program:
    """Parse a code cell into a Program. Raises ParseError with position."""
    statements: list[Statement] = []
    for line_no, raw in enumerate(source.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _lex_line(raw, line_no)
        statements.append(_LineParser(tokens).parse_statement())
        if len(statements) > MAX_STATEMENTS:
            raise ParseError(
                f"program exceeds {MAX_STATEMENTS} statements", line_no, 1
            )
    return Program(tuple(statements), source)
