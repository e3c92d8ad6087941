"""Deterministic ``.fql`` rendering of syntax trees and engine objects.

Engine objects are first converted back to syntax trees (:func:`to_decl`),
so that ``parse(pretty_print(x))`` elaborates to ``x`` again.
"""

from __future__ import annotations

import json
import re

from ..catcore import IDENTITY, IDENT_RE, Path, Schema
from ..instance import Instance
from ..mapping import AttrExpr, Const, Mapping, NullExpr, PathExpr
from ..migrate import FilterSpec, MergeSpec, Pipeline
from ..values import Lit, Null, Value, format_literal
from .lexer import KEYWORDS
from .nodes import (AssignDecl, AttrDecl, CallNode, ConditionDecl, Declaration, EntityMapDecl,
                    EntityRowsDecl, EquationDecl, ExprNode, FilterDecl, FkDecl, GenMapDecl,
                    ImportDecl, InstanceDecl, KeyDecl, LitNode, MappingDecl, MergeDecl,
                    MigrateDecl, NullNode, PathNode, RefNode, RowDecl, SchemaDecl, StepDecl,
                    ValueEquationDecl)

_INT_RE = re.compile(r"-?(0|[1-9][0-9]*)\Z")
_INDENT = "  "


# ---------------------------------------------------------------------------
# objects -> syntax

def path_node(p: Path) -> PathNode:
    return PathNode(p.start, p.steps or (IDENTITY,))


def _expr_node(e: AttrExpr) -> ExprNode:
    if isinstance(e, PathExpr):
        return path_node(e.path)
    if isinstance(e, Const):
        return LitNode(e.value.type, e.value.value)
    if isinstance(e, NullExpr):
        return NullNode(None)
    return CallNode(e.fn, tuple(_expr_node(a) for a in e.args))


def _value_node(v: Value) -> ExprNode:
    if isinstance(v, Lit):
        return LitNode(v.type, v.value)
    if isinstance(v, Null):
        return NullNode(v.label)
    return CallNode(v.fn, tuple(_value_node(a) for a in v.args))


def _row_ref(row: str) -> ExprNode:
    if IDENT_RE.match(row) and row not in KEYWORDS:
        return RefNode(row)
    if _INT_RE.match(row):
        return LitNode("Int", int(row))
    return LitNode("String", row)


def to_decl(obj) -> Declaration:
    if isinstance(obj, Schema):
        return SchemaDecl(
            obj.name, obj.entities,
            tuple(FkDecl(f.name, f.source, f.target) for f in obj.fks),
            tuple(AttrDecl(a.name, a.source, a.type) for a in obj.attrs),
            tuple(EquationDecl(e.label, path_node(e.lhs), path_node(e.rhs))
                  for e in obj.equations))
    if isinstance(obj, Mapping):
        S = obj.source
        gens = [GenMapDecl("fk", f.source, f.name, path_node(obj.fk_map[(f.source, f.name)]))
                for f in S.fks if (f.source, f.name) in obj.fk_map]
        gens += [GenMapDecl("attr", a.source, a.name, _expr_node(obj.attr_map[(a.source, a.name)]))
                 for a in S.attrs if (a.source, a.name) in obj.attr_map]
        return MappingDecl(obj.name, S.name, obj.target.name,
                           tuple(EntityMapDecl(e, obj.entity_map[e]) for e in S.entities
                                 if e in obj.entity_map),
                           tuple(gens))
    if isinstance(obj, Instance):
        S = obj.schema
        blocks = []
        for e in S.entities:
            rows = []
            for r in obj.rows[e]:
                assigns = [AssignDecl(f.name, _row_ref(obj.fks[(e, f.name)][r]))
                           for f in S.fks_from(e)]
                assigns += [AssignDecl(a.name, _value_node(obj.attrs[(e, a.name)][r]))
                            for a in S.attrs_from(e)]
                rows.append(RowDecl(r, tuple(assigns)))
            if rows:
                blocks.append(EntityRowsDecl(e, tuple(rows)))
        eqs = tuple(ValueEquationDecl(_value_node(a), _value_node(b)) for a, b in obj.equations)
        return InstanceDecl(obj.name, S.name, tuple(blocks), eqs)
    if isinstance(obj, MergeSpec):
        keys = tuple(KeyDecl(e, tuple(path_node(p) for p in obj.keys[e]))
                     for e in obj.overlap.entities if obj.keys.get(e))
        return MergeDecl(obj.name, obj.overlap.name, obj.left.name, obj.right.name, keys)
    if isinstance(obj, FilterSpec):
        return FilterDecl(obj.name, obj.schema.name, obj.entity,
                          tuple(ConditionDecl(c.attr, c.op, LitNode(c.value.type, c.value.value))
                                for c in obj.conditions))
    if isinstance(obj, Pipeline):
        return MigrateDecl(obj.name, tuple(
            StepDecl(s.kind, s.target.name) for s in obj.steps))
    raise TypeError(f"cannot print {type(obj).__name__}")


# ---------------------------------------------------------------------------
# syntax -> text

def _path(p: PathNode) -> str:
    return " . ".join((p.start, *p.steps))


def _row_id(row: str) -> str:
    if (IDENT_RE.match(row) and row not in KEYWORDS) or _INT_RE.match(row):
        return row
    return json.dumps(row, ensure_ascii=False)


def _expr(e: ExprNode) -> str:
    if isinstance(e, PathNode):
        return _path(e)
    if isinstance(e, LitNode):
        return format_literal(e.type, e.value)
    if isinstance(e, NullNode):
        return "null" if e.label is None else f"?{e.label}"
    if isinstance(e, RefNode):
        return e.text
    return f"{e.fn}(" + ", ".join(_expr(a) for a in e.args) + ")"


def _schema(d: SchemaDecl) -> list[str]:
    out = [f"schema {d.name} {{"]
    if d.entities:
        out.append(f"{_INDENT}entities {', '.join(d.entities)};")
    if d.fks:
        out.append(f"{_INDENT}fks")
        out += [f"{_INDENT * 2}{f.name} : {f.source} -> {f.target};" for f in d.fks]
    if d.attrs:
        out.append(f"{_INDENT}attrs")
        out += [f"{_INDENT * 2}{a.name} : {a.source} -> {a.type};" for a in d.attrs]
    if d.equations:
        out.append(f"{_INDENT}equations")
        for e in d.equations:
            head = f"{e.label} : " if e.label else ""
            out.append(f"{_INDENT * 2}{head}{_path(e.lhs)} = {_path(e.rhs)};")
    out.append("}")
    return out


def _mapping(d: MappingDecl) -> list[str]:
    out = [f"mapping {d.name} : {d.source} -> {d.target} {{"]
    out += [f"{_INDENT}entity {e.source} -> {e.target};" for e in d.entities]
    for g in d.generators:
        gen = g.name if g.entity is None else f"{g.entity} . {g.name}"
        out.append(f"{_INDENT}{g.kind} {gen} -> {_expr(g.image)};")
    out.append("}")
    return out


def _instance(d: InstanceDecl) -> list[str]:
    out = [f"instance {d.name} : {d.schema} {{"]
    for block in d.blocks:
        out.append(f"{_INDENT}{block.entity} {{")
        for row in block.rows:
            body = " ".join(f"{a.name} = {_expr(a.value)};" for a in row.assignments)
            out.append(f"{_INDENT * 2}row {_row_id(row.id)} {{ {body} }}" if body
                       else f"{_INDENT * 2}row {_row_id(row.id)} {{ }}")
        out.append(f"{_INDENT}}}")
    if d.equations:
        out.append(f"{_INDENT}equations")
        out += [f"{_INDENT * 2}{_expr(e.lhs)} = {_expr(e.rhs)};" for e in d.equations]
    out.append("}")
    return out


def _merge(d: MergeDecl) -> list[str]:
    out = [f"merge {d.name} {{", f"{_INDENT}overlap {d.overlap};", f"{_INDENT}left {d.left};",
           f"{_INDENT}right {d.right};"]
    if d.keys:
        out.append(f"{_INDENT}keys")
        out += [f"{_INDENT * 2}{k.entity} : {', '.join(_path(p) for p in k.paths)};"
                for k in d.keys]
    out.append("}")
    return out


def _filter(d: FilterDecl) -> list[str]:
    out = [f"filter {d.name} : {d.schema} {{", f"{_INDENT}entity {d.entity};"]
    if d.conditions:
        conds = ", ".join(f"{c.attr} {c.op} {_expr(c.value)}" for c in d.conditions)
        out.append(f"{_INDENT}where {conds};")
    out.append("}")
    return out


def _migrate(d: MigrateDecl) -> list[str]:
    return ([f"migrate {d.name} {{"] + [f"{_INDENT}{s.kind} {s.target};" for s in d.steps]
            + ["}"])


_RENDER = {SchemaDecl: _schema, MappingDecl: _mapping, InstanceDecl: _instance,
           MergeDecl: _merge, FilterDecl: _filter, MigrateDecl: _migrate,
           ImportDecl: lambda d: [f"import {json.dumps(d.path)};"]}


def pretty_print(obj) -> str:
    """Render a declaration, an engine object, a Program or a list of either."""
    from .elaborate import Program

    if isinstance(obj, Program):
        items = [*obj.schemas.values(), *obj.mappings.values(), *obj.instances.values(),
                 *obj.merges.values(), *obj.filters.values(), *obj.pipelines.values()]
    elif isinstance(obj, (list, tuple)):
        items = list(obj)
    else:
        items = [obj]
    blocks = []
    for item in items:
        decl = item if type(item) in _RENDER else to_decl(item)
        blocks.append("\n".join(_RENDER[type(decl)](decl)))
    return "\n\n".join(blocks) + ("\n" if blocks else "")
