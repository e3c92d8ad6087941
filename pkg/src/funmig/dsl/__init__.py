"""The ``.fql`` language: parsing, elaboration and pretty-printing."""

from .elaborate import (ELABORATION_CODES, Program, elaborate, load_program, load_text,
                        parse_file, parse_value)
from .lexer import KEYWORDS, FqlSyntaxError, Span, Token, tokenize
from .parser import parse
from .printer import pretty_print, to_decl

__all__ = ["ELABORATION_CODES", "FqlSyntaxError", "KEYWORDS", "Program", "Span", "Token",
           "elaborate", "load_program", "load_text", "parse", "parse_file", "parse_value", "pretty_print",
           "to_decl", "tokenize"]
