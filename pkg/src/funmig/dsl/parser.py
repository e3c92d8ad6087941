"""Recursive-descent parser producing :mod:`funmig.dsl.nodes` trees.

The grammar is LL(2): the only two-token lookaheads are an equation label
(``name :``) and a function call (``name (``).
"""

from __future__ import annotations

from .lexer import FqlSyntaxError, Token, tokenize
from .nodes import (AssignDecl, AttrDecl, CallNode, ConditionDecl, Declaration, EntityMapDecl,
                    EntityRowsDecl, EquationDecl, ExprNode, FilterDecl, FkDecl, GenMapDecl,
                    ImportDecl, InstanceDecl, KeyDecl, LitNode, MappingDecl, MergeDecl,
                    MigrateDecl, NullNode, PathNode, RefNode, RowDecl, SchemaDecl, StepDecl,
                    ValueEquationDecl)

COMPARISONS = ("==", "!=", "<=", ">=", "<", ">")
_LITERAL_KINDS = ("int", "float", "string", "true", "false")


class Parser:
    def __init__(self, tokens: list[Token]) -> None:
        self.tokens = tokens
        self.pos = 0
        self.expected: set[str] = set()

    # token helpers -----------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _kind(self, tok: Token) -> str:
        return tok.text if tok.kind == "keyword" else tok.kind

    def at(self, *kinds: str, offset: int = 0) -> bool:
        if offset == 0:
            self.expected.update(kinds)
        tok = self.tokens[min(self.pos + offset, len(self.tokens) - 1)]
        return self._kind(tok) in kinds

    def advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        self.expected = set()
        return tok

    def accept(self, *kinds: str) -> Token | None:
        return self.advance() if self.at(*kinds) else None

    def expect(self, *kinds: str) -> Token:
        if self.at(*kinds):
            return self.advance()
        self.fail(f"unexpected {self.tok.describe()}")

    def fail(self, message: str):
        raise FqlSyntaxError(message, self.tok.span, frozenset(self.expected))

    def ident(self) -> str:
        return self.expect("ident").text

    # declarations ------------------------------------------------------------

    def program(self) -> list[Declaration]:
        decls: list[Declaration] = []
        while not self.at("eof"):
            if self.at("schema"):
                decls.append(self.schema())
            elif self.at("mapping"):
                decls.append(self.mapping())
            elif self.at("instance"):
                decls.append(self.instance())
            elif self.at("merge"):
                decls.append(self.merge())
            elif self.at("filter"):
                decls.append(self.filter())
            elif self.at("migrate"):
                decls.append(self.migrate())
            elif self.at("import"):
                span = self.advance().span
                path = self.expect("string").value
                self.expect(";")
                decls.append(ImportDecl(path, span))
            else:
                self.fail(f"unexpected {self.tok.describe()} at top level")
        return decls

    def schema(self) -> SchemaDecl:
        span = self.expect("schema").span
        name = self.ident()
        self.expect("{")
        entities, entity_spans = [], []
        fks, attrs, equations = [], [], []
        while not self.accept("}"):
            if self.accept("entities"):
                while True:
                    tok = self.expect("ident")
                    entities.append(tok.text)
                    entity_spans.append(tok.span)
                    if not self.accept(","):
                        break
                self.expect(";")
            elif self.accept("fks"):
                while self.at("ident"):
                    tok = self.advance()
                    self.expect(":")
                    source = self.ident()
                    self.expect("->")
                    fks.append(FkDecl(tok.text, source, self.ident(), tok.span))
                    self.expect(";")
            elif self.accept("attrs"):
                while self.at("ident"):
                    tok = self.advance()
                    self.expect(":")
                    source = self.ident()
                    self.expect("->")
                    attrs.append(AttrDecl(tok.text, source, self.ident(), tok.span))
                    self.expect(";")
            elif self.accept("equations"):
                while self.at("ident"):
                    start = self.tok.span
                    label = None
                    if self.at(":", offset=1):
                        label = self.advance().text
                        self.advance()
                    lhs = self.path()
                    self.expect("=")
                    rhs = self.path()
                    self.expect(";")
                    equations.append(EquationDecl(label, lhs, rhs, start))
            else:
                self.fail(f"unexpected {self.tok.describe()} in schema {name}")
        return SchemaDecl(name, tuple(entities), tuple(fks), tuple(attrs), tuple(equations),
                          span, tuple(entity_spans))

    def path(self) -> PathNode:
        tok = self.expect("ident")
        steps = []
        while self.accept("."):
            steps.append(self.expect("ident", "id").text)
        return PathNode(tok.text, tuple(steps), tok.span)

    def mapping(self) -> MappingDecl:
        span = self.expect("mapping").span
        name = self.ident()
        self.expect(":")
        source = self.ident()
        self.expect("->")
        target = self.ident()
        self.expect("{")
        entities, gens = [], []
        while not self.accept("}"):
            if self.at("entity"):
                tok = self.advance()
                src = self.ident()
                self.expect("->")
                entities.append(EntityMapDecl(src, self.ident(), tok.span))
            elif self.at("fk", "attr"):
                tok = self.advance()
                first = self.ident()
                entity, gen = (first, self.ident()) if self.accept(".") else (None, first)
                self.expect("->")
                image = self.path() if tok.text == "fk" else self.attr_expr()
                gens.append(GenMapDecl(tok.text, entity, gen, image, tok.span))
            else:
                self.fail(f"unexpected {self.tok.describe()} in mapping {name}")
            self.expect(";")
        return MappingDecl(name, source, target, tuple(entities), tuple(gens), span)

    def literal(self) -> LitNode:
        tok = self.expect(*_LITERAL_KINDS)
        kind = self._kind(tok)
        if kind == "int":
            return LitNode("Int", tok.value, tok.span)
        if kind == "float":
            return LitNode("Float", tok.value, tok.span)
        if kind == "string":
            return LitNode("String", tok.value, tok.span)
        return LitNode("Bool", kind == "true", tok.span)

    def _call(self, argument) -> CallNode:
        tok = self.advance()
        self.expect("(")
        args: list[ExprNode] = []
        if not self.accept(")"):
            while True:
                args.append(argument())
                if self.accept(")"):
                    break
                self.expect(",")
        return CallNode(tok.text, tuple(args), tok.span)

    def attr_expr(self) -> ExprNode:
        if self.at("null"):
            return NullNode(None, self.advance().span)
        if self.at(*_LITERAL_KINDS):
            return self.literal()
        if self.at("ident") and self.at("(", offset=1):
            return self._call(self.attr_expr)
        return self.path()

    def value(self) -> ExprNode:
        if self.at("nullref"):
            tok = self.advance()
            return NullNode(tok.value, tok.span)
        if self.at(*_LITERAL_KINDS):
            return self.literal()
        if self.at("ident") and self.at("(", offset=1):
            return self._call(self.value)
        tok = self.expect("ident")
        return RefNode(tok.text, tok.span)

    def instance(self) -> InstanceDecl:
        span = self.expect("instance").span
        name = self.ident()
        self.expect(":")
        schema = self.ident()
        self.expect("{")
        blocks, equations = [], []
        while not self.accept("}"):
            if self.accept("equations"):
                while not self.at("}") and not (self.at("ident") and self.at("{", offset=1)):
                    start = self.tok.span
                    lhs = self.value()
                    self.expect("=")
                    rhs = self.value()
                    self.expect(";")
                    equations.append(ValueEquationDecl(lhs, rhs, start))
                continue
            tok = self.expect("ident")
            self.expect("{")
            rows = []
            while not self.accept("}"):
                rspan = self.expect("row").span
                rid = self.expect("ident", "int", "string")
                self.expect("{")
                assigns = []
                while not self.accept("}"):
                    gen = self.expect("ident")
                    self.expect("=")
                    assigns.append(AssignDecl(gen.text, self.value(), gen.span))
                    self.expect(";")
                rows.append(RowDecl(str(rid.value), tuple(assigns), rspan))
            blocks.append(EntityRowsDecl(tok.text, tuple(rows), tok.span))
        return InstanceDecl(name, schema, tuple(blocks), tuple(equations), span)

    def merge(self) -> MergeDecl:
        span = self.expect("merge").span
        name = self.ident()
        self.expect("{")
        parts: dict[str, str] = {}
        keys = []
        while not self.accept("}"):
            if self.at("overlap", "left", "right"):
                tok = self.advance()
                if tok.text in parts:
                    self.fail(f"{tok.text} given twice in merge {name}")
                parts[tok.text] = self.ident()
                self.expect(";")
            elif self.accept("keys"):
                while self.at("ident"):
                    tok = self.advance()
                    self.expect(":")
                    paths = [self.path()]
                    while self.accept(","):
                        paths.append(self.path())
                    self.expect(";")
                    keys.append(KeyDecl(tok.text, tuple(paths), tok.span))
            else:
                self.fail(f"unexpected {self.tok.describe()} in merge {name}")
        missing = [p for p in ("overlap", "left", "right") if p not in parts]
        if missing:
            self.pos -= 1
            self.expected = set(missing)
            self.fail(f"merge {name} is missing {', '.join(missing)}")
        return MergeDecl(name, parts["overlap"], parts["left"], parts["right"], tuple(keys), span)

    def filter(self) -> FilterDecl:
        span = self.expect("filter").span
        name = self.ident()
        self.expect(":")
        schema = self.ident()
        self.expect("{")
        self.expect("entity")
        entity = self.ident()
        self.expect(";")
        conditions = []
        if self.accept("where"):
            while True:
                tok = self.expect("ident")
                op = self.expect(*COMPARISONS).text
                conditions.append(ConditionDecl(tok.text, op, self.literal(), tok.span))
                if not self.accept(","):
                    break
            self.expect(";")
        self.expect("}")
        return FilterDecl(name, schema, entity, tuple(conditions), span)

    def migrate(self) -> MigrateDecl:
        span = self.expect("migrate").span
        name = self.ident()
        self.expect("{")
        steps = []
        while not self.accept("}"):
            tok = self.expect("delta", "sigma", "filter")
            steps.append(StepDecl(tok.text, self.ident(), tok.span))
            self.expect(";")
        return MigrateDecl(name, tuple(steps), span)


def parse(text: str, file: str = "<input>") -> list[Declaration]:
    """Parse ``.fql`` text into declarations; raises FqlSyntaxError."""
    return Parser(tokenize(text, file)).program()
