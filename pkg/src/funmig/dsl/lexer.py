"""Tokenizer for ``.fql`` source text."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from ..errors import FunmigError

KEYWORDS = frozenset("""
    schema entities fks attrs equations mapping entity fk attr instance row
    merge overlap left right keys filter where migrate delta sigma import
    null true false id
""".split())

BASE_TYPE_NAMES = ("Int", "Float", "String", "Bool")

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<float>-?\d+\.\d+(?:[eE][+-]?\d+)?|-?\d+[eE][+-]?\d+)
  | (?P<int>-?\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<null>\?[A-Za-z0-9_']+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<op>->|==|!=|<=|>=|[{}();:,.=<>])
""", re.VERBOSE)


@dataclass(frozen=True)
class Span:
    file: str
    line: int
    column: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, float, string, nullref, eof, or the operator text
    text: str
    value: object
    span: Span

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


class FqlSyntaxError(FunmigError):
    code = "SyntaxError"

    def __init__(self, message: str, span: Span, expected: frozenset[str] = frozenset()):
        self.span = span
        self.expected = expected
        self.detail = message
        suffix = f" (expected {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{span}: {message}{suffix}")


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        span = Span(file, line, pos - line_start + 1)
        if m is None:
            raise FqlSyntaxError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "ws":
            newlines = lexeme.count("\n")
            if newlines:
                line += newlines
                line_start = pos + lexeme.rindex("\n") + 1
        elif kind == "comment":
            pass
        elif kind == "ident":
            tokens.append(Token("keyword" if lexeme in KEYWORDS else "ident", lexeme, lexeme, span))
        elif kind == "int":
            tokens.append(Token("int", lexeme, int(lexeme), span))
        elif kind == "float":
            tokens.append(Token("float", lexeme, float(lexeme), span))
        elif kind == "string":
            try:
                value = json.loads(lexeme)
            except json.JSONDecodeError:
                raise FqlSyntaxError(f"bad escape in string {lexeme}", span) from None
            tokens.append(Token("string", lexeme, value, span))
        elif kind == "null":
            tokens.append(Token("nullref", lexeme, lexeme[1:], span))
        else:
            tokens.append(Token(lexeme, lexeme, lexeme, span))
        pos = m.end()
    tokens.append(Token("eof", "", None, Span(file, line, pos - line_start + 1)))
    return tokens
