"""Name resolution and type checking from syntax trees to engine objects."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path as FsPath

from ..catcore import (IDENTITY, Attr, Diagnostic, Equation, Fk, Path, Schema,
                       validate_schema)
from ..errors import FunmigError
from ..instance import Instance, InstanceBuilder
from ..mapping import Apply, AttrExpr, Const, Mapping, NullExpr, PathExpr, mapping_problems
from ..migrate import Condition, FilterSpec, MergeSpec, Pipeline, Step
from ..udf import DEFAULT_REGISTRY, UdfRegistry
from ..values import Lit, Null, Value, lit
from .lexer import Span
from .nodes import (CallNode, Declaration, ExprNode, FilterDecl, ImportDecl, InstanceDecl,
                    LitNode, MappingDecl, MergeDecl, MigrateDecl, NullNode, PathNode, RefNode,
                    SchemaDecl)
from .parser import parse

ELABORATION_CODES = frozenset({"UnresolvedName", "TypeMismatch", "DuplicateDeclaration",
                               "DanglingForeignKey", "ImportCycle", "MissingFile"})


@dataclass
class Program:
    """Everything declared by a set of ``.fql`` files."""

    schemas: dict[str, Schema] = field(default_factory=dict)
    mappings: dict[str, Mapping] = field(default_factory=dict)
    instances: dict[str, Instance] = field(default_factory=dict)
    merges: dict[str, MergeSpec] = field(default_factory=dict)
    filters: dict[str, FilterSpec] = field(default_factory=dict)
    pipelines: dict[str, Pipeline] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)
    validation: list[Diagnostic] = field(default_factory=list)
    spans: dict[str, Span] = field(default_factory=dict)
    declarations: list[Declaration] = field(default_factory=list)
    registry: UdfRegistry = DEFAULT_REGISTRY

    @property
    def ok(self) -> bool:
        return not self.diagnostics and not self.validation

    def get(self, table: str, name: str):
        objects = getattr(self, table)
        if name not in objects:
            kind = table.rstrip("s")
            known = ", ".join(sorted(objects)) or "none"
            raise FunmigError(f"no {kind} named {name!r} (known: {known})")
        return objects[name]


class _Failed(Exception):
    """Abort elaboration of one declaration after recording a diagnostic."""


class _Elaborator:
    def __init__(self, registry: UdfRegistry) -> None:
        self.prog = Program(registry=registry)
        self.registry = registry
        self.invalid: set[str] = set()
        self.current = ""

    def error(self, code: str, message: str, span: Span, element: str = "") -> _Failed:
        self.prog.diagnostics.append(Diagnostic(code, message, element or self.current, span))
        return _Failed()

    def schema_of(self, name: str, span: Span) -> Schema:
        if name in self.invalid:
            raise _Failed()
        if name not in self.prog.schemas:
            raise self.error("UnresolvedName", f"unknown schema {name}", span)
        return self.prog.schemas[name]

    def lookup(self, table: str, name: str, span: Span, what: str):
        if name in self.invalid:
            raise _Failed()
        objects = getattr(self.prog, table)
        if name not in objects:
            raise self.error("UnresolvedName", f"unknown {what} {name}", span)
        return objects[name]

    def path(self, s: Schema, node: PathNode) -> Path:
        try:
            return s.path(node.start, node.steps)
        except FunmigError as exc:
            code = "TypeMismatch" if exc.code == "TypeMismatch" else "UnresolvedName"
            raise self.error(code, f"{_path_text(node)}: {exc}", node.span) from None

    # schemas -----------------------------------------------------------------

    def schema(self, d: SchemaDecl) -> None:
        fks = tuple(Fk(f.name, f.source, f.target) for f in d.fks)
        attrs = tuple(Attr(a.name, a.source, a.type) for a in d.attrs)
        shell = Schema(d.name, d.entities, fks, attrs)
        equations = tuple(Equation(_lenient_path(shell, e.lhs), _lenient_path(shell, e.rhs),
                                   e.label) for e in d.equations)
        s = Schema(d.name, d.entities, fks, attrs, equations)
        spans: dict[str, Span] = dict(zip(d.entities, d.entity_spans))
        for g in (*d.fks, *d.attrs):
            spans.setdefault(f"{g.source}.{g.name}", g.span)
        for i, e in enumerate(d.equations):
            spans.setdefault(e.label or f"equation#{i + 1}", e.span)
        problems = validate_schema(s)
        for diag in problems:
            self.prog.validation.append(Diagnostic(diag.code, f"{d.name}: {diag.message}",
                                                   diag.element, spans.get(diag.element, d.span)))
        if problems:
            self.invalid.add(d.name)
        self.prog.schemas[d.name] = s

    # mappings ----------------------------------------------------------------

    def mapping(self, d: MappingDecl) -> None:
        S = self.schema_of(d.source, d.span)
        T = self.schema_of(d.target, d.span)
        entity_map: dict[str, str] = {}
        for em in d.entities:
            if not S.has_entity(em.source):
                raise self.error("UnresolvedName", f"{S.name} has no entity {em.source}", em.span)
            if not T.has_entity(em.target):
                raise self.error("UnresolvedName", f"{T.name} has no entity {em.target}", em.span)
            if em.source in entity_map:
                raise self.error("DuplicateDeclaration", f"entity {em.source} mapped twice",
                                 em.span)
            entity_map[em.source] = em.target
        fk_map: dict[tuple[str, str], Path] = {}
        attr_map: dict[tuple[str, str], AttrExpr] = {}
        for gm in d.generators:
            gen = self._source_generator(S, gm.entity, gm.name, gm.span)
            key = (gen.source, gen.name)
            if key in fk_map or key in attr_map:
                raise self.error("DuplicateDeclaration",
                                 f"{gen.source}.{gen.name} mapped twice", gm.span)
            if gm.kind == "fk":
                if not isinstance(gen, Fk):
                    raise self.error("TypeMismatch", f"{gen.source}.{gen.name} is an attribute; "
                                     "map it with attr", gm.span)
                fk_map[key] = self.path(T, gm.image)
            else:
                if not isinstance(gen, Attr):
                    raise self.error("TypeMismatch", f"{gen.source}.{gen.name} is a foreign key; "
                                     "map it with fk", gm.span)
                attr_map[key] = self.attr_expr(T, gm.image, gen.type)
        F = Mapping(S, T, entity_map, fk_map, attr_map, d.name, self.registry)
        problems = mapping_problems(F)
        if problems:
            raise self.error("TypeMismatch", f"mapping {d.name}: " + "; ".join(problems), d.span)
        self.prog.mappings[d.name] = F

    def _source_generator(self, S: Schema, entity: str | None, name: str, span: Span):
        if entity is not None:
            try:
                return S.generator(entity, name)
            except FunmigError:
                raise self.error("UnresolvedName", f"{S.name} has no generator {entity}.{name}",
                                 span) from None
        found = [g for g in (*S.fks, *S.attrs) if g.name == name]
        if len(found) != 1:
            why = "no" if not found else "more than one"
            raise self.error("UnresolvedName", f"{S.name} has {why} generator named {name}; "
                             "qualify it as Entity.name", span)
        return found[0]

    def attr_expr(self, T: Schema, node: ExprNode, expected: str) -> AttrExpr:
        if isinstance(node, NullNode):
            return NullExpr(expected)
        if isinstance(node, LitNode):
            return Const(self.literal(node, expected))
        if isinstance(node, PathNode):
            p = self.path(T, node)
            if not p.is_attribute:
                raise self.error("TypeMismatch", f"{p} is not attribute-valued", node.span)
            return PathExpr(p)
        if isinstance(node, CallNode):
            sig = self._signature(node)
            args = tuple(self.attr_expr(T, a, t) for a, t in zip(node.args, sig.arg_types))
            return Apply(node.fn, args, sig.return_type)
        raise self.error("TypeMismatch", "unexpected expression", node.span)

    def _signature(self, node: CallNode):
        if node.fn not in self.registry:
            raise self.error("UnresolvedName", f"unknown function {node.fn}", node.span)
        sig = self.registry.signature(node.fn)
        if len(node.args) != sig.arity:
            raise self.error("TypeMismatch", f"{node.fn} takes {sig.arity} arguments, "
                             f"got {len(node.args)}", node.span)
        return sig

    def literal(self, node: LitNode, expected: str | None) -> Lit:
        type_ = node.type
        if expected == "Float" and type_ == "Int":
            type_ = "Float"
        if expected is not None and type_ != expected:
            raise self.error("TypeMismatch", f"expected {expected}, got a {node.type} literal",
                             node.span)
        return lit(type_, node.value)

    # instances ---------------------------------------------------------------

    def instance(self, d: InstanceDecl) -> None:
        S = self.schema_of(d.schema, d.span)
        b = InstanceBuilder(S, d.name, self.registry)
        for block in d.blocks:
            if not S.has_entity(block.entity):
                raise self.error("UnresolvedName", f"{S.name} has no entity {block.entity}",
                                 block.span)
            for row in block.rows:
                if b.has_row(block.entity, row.id):
                    raise self.error("DuplicateDeclaration",
                                     f"row {block.entity}:{row.id} declared twice", row.span)
                b.add_row(block.entity, row.id)
        null_types: dict[str, str] = {}
        for block in d.blocks:
            for row in block.rows:
                seen: set[str] = set()
                for a in row.assignments:
                    try:
                        gen = S.generator(block.entity, a.name)
                    except FunmigError:
                        raise self.error("UnresolvedName",
                                         f"{block.entity} has no generator {a.name}",
                                         a.span) from None
                    if a.name in seen:
                        raise self.error("DuplicateDeclaration",
                                         f"{block.entity}:{row.id}.{a.name} assigned twice", a.span)
                    seen.add(a.name)
                    if isinstance(gen, Fk):
                        b.set_fk(block.entity, a.name, row.id, self.row_ref(a.value))
                    else:
                        b.set_attr(block.entity, a.name, row.id,
                                   self.value(a.value, gen.type, null_types))
        for eq in d.equations:
            hint = self._value_type(eq.lhs, null_types) or self._value_type(eq.rhs, null_types)
            if hint is None:
                raise self.error("TypeMismatch", "cannot infer the type of this equation",
                                 eq.span)
            b.equate(self.value(eq.lhs, hint, null_types), self.value(eq.rhs, hint, null_types))
        try:
            inst = b.finalize()
            inst.closure
        except FunmigError as exc:
            raise self.error(exc.code, f"instance {d.name}: {exc}", d.span) from None
        self.prog.instances[d.name] = inst

    def row_ref(self, node: ExprNode) -> str:
        if isinstance(node, RefNode):
            return node.text
        if isinstance(node, LitNode) and node.type in ("Int", "String"):
            return str(node.value)
        raise self.error("TypeMismatch", "a foreign key needs a row id", node.span)

    def _value_type(self, node: ExprNode, null_types: dict[str, str]) -> str | None:
        if isinstance(node, LitNode):
            return node.type
        if isinstance(node, NullNode):
            return null_types.get(node.label)
        if isinstance(node, CallNode) and node.fn in self.registry:
            return self.registry.signature(node.fn).return_type
        return None

    def value(self, node: ExprNode, expected: str, null_types: dict[str, str]) -> Value:
        if isinstance(node, LitNode):
            return self.literal(node, expected)
        if isinstance(node, NullNode):
            if node.label is None:
                raise self.error("TypeMismatch", "instances name their nulls: use ?label",
                                 node.span)
            known = null_types.setdefault(node.label, expected)
            if known != expected:
                raise self.error("TypeMismatch", f"null ?{node.label} used as {known} and "
                                 f"{expected}", node.span)
            return Null(node.label, expected)
        if isinstance(node, CallNode):
            sig = self._signature(node)
            if sig.return_type != expected:
                raise self.error("TypeMismatch", f"{node.fn} returns {sig.return_type}, "
                                 f"expected {expected}", node.span)
            args = [self.value(a, t, null_types) for a, t in zip(node.args, sig.arg_types)]
            try:
                return self.registry.apply(node.fn, args)
            except FunmigError as exc:
                raise self.error(exc.code, str(exc), node.span) from None
        raise self.error("TypeMismatch", f"bare name {node.text} is not a {expected} value; "
                         "quote strings", node.span)

    # merge, filter, migrate --------------------------------------------------

    def merge(self, d: MergeDecl) -> None:
        O = self.schema_of(d.overlap, d.span)
        L = self.lookup("mappings", d.left, d.span, "mapping")
        R = self.lookup("mappings", d.right, d.span, "mapping")
        for leg, F in (("left", L), ("right", R)):
            if F.source != O:
                raise self.error("TypeMismatch", f"{leg} mapping {F.name} starts at "
                                 f"{F.source.name}, not {O.name}", d.span)
        keys: dict[str, tuple[Path, ...]] = {}
        for k in d.keys:
            if not O.has_entity(k.entity):
                raise self.error("UnresolvedName", f"{O.name} has no entity {k.entity}", k.span)
            if k.entity in keys:
                raise self.error("DuplicateDeclaration", f"keys for {k.entity} given twice",
                                 k.span)
            paths = tuple(self.path(O, p) for p in k.paths)
            for p, node in zip(paths, k.paths):
                if p.start != k.entity:
                    raise self.error("TypeMismatch", f"key {p} does not start at {k.entity}",
                                     node.span)
            keys[k.entity] = paths
        self.prog.merges[d.name] = MergeSpec(O, L, R, keys, d.name)

    def filter(self, d: FilterDecl) -> None:
        S = self.schema_of(d.schema, d.span)
        if not S.has_entity(d.entity):
            raise self.error("UnresolvedName", f"{S.name} has no entity {d.entity}", d.span)
        conditions = []
        for c in d.conditions:
            found = [a for a in S.attrs_from(d.entity) if a.name == c.attr]
            if not found:
                raise self.error("UnresolvedName", f"{d.entity} has no attribute {c.attr}",
                                 c.span)
            numeric = {"Int", "Float"}
            if c.value.type != found[0].type and not {c.value.type, found[0].type} <= numeric:
                raise self.error("TypeMismatch", f"{c.attr} is {found[0].type}, compared with "
                                 f"{c.value.type}", c.value.span)
            conditions.append(Condition(c.attr, c.op, lit(c.value.type, c.value.value)))
        self.prog.filters[d.name] = FilterSpec(S, d.entity, tuple(conditions), d.name)

    def migrate(self, d: MigrateDecl) -> None:
        steps = []
        for s in d.steps:
            table, what = ("filters", "filter") if s.kind == "filter" else ("mappings", "mapping")
            steps.append(Step(s.kind, self.lookup(table, s.target, s.span, what)))
        for (a, b), node in zip(zip(steps, steps[1:]), d.steps[1:]):
            if a.output_schema != b.input_schema:
                raise self.error("TypeMismatch", f"step {node.target} expects "
                                 f"{b.input_schema.name} but receives {a.output_schema.name}",
                                 node.span)
        self.prog.pipelines[d.name] = Pipeline(d.name, tuple(steps))


def _path_text(node: PathNode) -> str:
    return ".".join((node.start, *node.steps))


def _lenient_path(s: Schema, node: PathNode) -> Path:
    """Type a path as far as possible; validation reports what is wrong."""
    try:
        return s.path(node.start, node.steps)
    except FunmigError:
        steps = tuple(x for x in node.steps if x != IDENTITY)
        return Path(node.start, steps, "?" if steps else node.start)


_ORDER = (SchemaDecl, MappingDecl, InstanceDecl, MergeDecl, FilterDecl, MigrateDecl)


def elaborate(decls: list[Declaration], registry: UdfRegistry | None = None) -> Program:
    """Resolve declarations into a :class:`Program`, collecting diagnostics."""
    el = _Elaborator(registry or DEFAULT_REGISTRY)
    el.prog.declarations = list(decls)
    owners: dict[str, Declaration] = {}
    for d in decls:
        if isinstance(d, ImportDecl):
            continue
        if d.name in owners:
            el.error("DuplicateDeclaration", f"{d.name} is already declared at "
                     f"{owners[d.name].span}", d.span, d.name)
            el.invalid.add(d.name)
            continue
        owners[d.name] = d
        el.prog.spans[d.name] = d.span
    handlers = {SchemaDecl: el.schema, MappingDecl: el.mapping, InstanceDecl: el.instance,
                MergeDecl: el.merge, FilterDecl: el.filter, MigrateDecl: el.migrate}
    for kind in _ORDER:
        for d in owners.values():
            if type(d) is not kind:
                continue
            el.current = d.name
            try:
                handlers[kind](d)
            except _Failed:
                el.invalid.add(d.name)
    return el.prog


def parse_file(path: str | FsPath) -> list[Declaration]:
    path = FsPath(path)
    text = path.read_text(encoding="utf-8")
    return parse(text, str(path))


def _collect(path: FsPath, stack: list[FsPath], done: set[FsPath],
             out: list[Declaration], diags: list[Diagnostic], span: Span | None) -> None:
    path = path.resolve()
    if path in stack:
        chain = " -> ".join(p.name for p in (*stack, path))
        diags.append(Diagnostic("ImportCycle", f"import cycle {chain}", str(path), span))
        return
    if path in done:
        return
    if not path.is_file():
        diags.append(Diagnostic("MissingFile", f"cannot read {path}", str(path), span))
        return
    decls = parse_file(path)
    stack.append(path)
    for d in decls:
        if isinstance(d, ImportDecl):
            _collect(path.parent / d.path, stack, done, out, diags, d.span)
    stack.pop()
    done.add(path)
    out.extend(decls)


def load_program(paths, registry: UdfRegistry | None = None) -> Program:
    """Parse files (following imports once each) and elaborate them together.

    Raises FqlSyntaxError on the first syntax error.
    """
    if isinstance(paths, (str, FsPath)):
        paths = [paths]
    decls: list[Declaration] = []
    diags: list[Diagnostic] = []
    done: set[FsPath] = set()
    for p in paths:
        _collect(FsPath(p), [], done, decls, diags, None)
    prog = elaborate(decls, registry)
    prog.diagnostics[:0] = diags
    return prog


def load_text(text: str, registry: UdfRegistry | None = None, file: str = "<input>") -> Program:
    return elaborate(parse(text, file), registry)


def parse_value(text: str, expected: str, registry: UdfRegistry | None = None,
                null_types: dict[str, str] | None = None) -> Value:
    """Read one instance value (literal, ``?label`` or function term) of a given type."""
    from .lexer import tokenize
    from .parser import Parser

    parser = Parser(tokenize(text, "<value>"))
    node = parser.value()
    parser.expect("eof")
    el = _Elaborator(registry or DEFAULT_REGISTRY)
    try:
        return el.value(node, expected, {} if null_types is None else null_types)
    except _Failed:
        raise FunmigError(el.prog.diagnostics[-1].message) from None
